#pragma once

#include <vector>

#include "latkit/nn/layers.hpp"

namespace latkit::nn {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

class Adam {
public:
    Adam(std::vector<Param*> params, AdamConfig cfg = {});
    void step(double lr);
    void zero_grad();
    i64 steps_taken() const { return t_; }

private:
    struct Slot {
        Param* p;
        Tensor m, v;
    };
    std::vector<Slot> slots_;
    AdamConfig cfg_;
    i64 t_ = 0;
};

class SgdMomentum {
public:
    SgdMomentum(std::vector<Param*> params, double momentum, double weight_decay);
    void step(double lr);
    void zero_grad();

private:
    struct Slot {
        Param* p;
        Tensor vel;
    };
    std::vector<Slot> slots_;
    double momentum_, weight_decay_;
};

// Cosine decay from base_lr to final_lr over total_steps, with an optional
// linear warmup from 0 over the first warmup_steps.
struct CosineSchedule {
    double base_lr = 0.1;
    double final_lr = 0.0;
    i64 total_steps = 1;
    i64 warmup_steps = 0;

    double lr_at(i64 step) const;
};

}  // namespace latkit::nn
