#pragma once

namespace latkit {

// Kernel execution mode. `parallel` runs the OpenMP variants, `serial` the
// reference loops. Both produce bit-identical results; the switch exists so
// tests can compare them and benchmarks can measure the gap.
enum class Exec { serial, parallel };

Exec execution();
void set_execution(Exec mode);

}  // namespace latkit
