#include "latkit/core/exec.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace latkit {

namespace {

Exec initial_mode() {
    const char* env = std::getenv("LATKIT_EXEC");
    if (env != nullptr && std::strcmp(env, "serial") == 0) return Exec::serial;
    return Exec::parallel;
}

std::atomic<Exec>& mode() {
    static std::atomic<Exec> m{initial_mode()};
    return m;
}

}  // namespace

Exec execution() { return mode().load(std::memory_order_relaxed); }
void set_execution(Exec m) { mode().store(m, std::memory_order_relaxed); }

}  // namespace latkit
