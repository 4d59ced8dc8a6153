#include "latkit/core/tensor.hpp"

namespace latkit {

i64 numel_of(const std::vector<i64>& shape) {
    i64 n = 1;
    for (i64 d : shape) {
        if (d < 0) throw ShapeError("negative dimension");
        n *= d;
    }
    return shape.empty() ? 0 : n;
}

}  // namespace latkit
