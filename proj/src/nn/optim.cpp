#include "latkit/nn/optim.hpp"

#include <cmath>

#include "latkit/core/kernels.hpp"

namespace latkit::nn {

Adam::Adam(std::vector<Param*> params, AdamConfig cfg) : cfg_(cfg) {
    for (Param* p : params)
        slots_.push_back({p, Tensor(p->value.shape()), Tensor(p->value.shape())});
}

void Adam::step(double lr) {
    ++t_;
    for (auto& s : slots_) {
        kernels::adam_step(s.p->value.numel(), s.p->value.data(), s.p->grad.data(),
                           s.m.data(), s.v.data(), lr, cfg_.beta1, cfg_.beta2,
                           cfg_.eps, cfg_.weight_decay, t_);
    }
}

void Adam::zero_grad() {
    for (auto& s : slots_) s.p->grad.fill(0.0);
}

SgdMomentum::SgdMomentum(std::vector<Param*> params, double momentum,
                         double weight_decay)
    : momentum_(momentum), weight_decay_(weight_decay) {
    for (Param* p : params) slots_.push_back({p, Tensor(p->value.shape())});
}

void SgdMomentum::step(double lr) {
    for (auto& s : slots_) {
        kernels::sgd_momentum_step(s.p->value.numel(), s.p->value.data(),
                                   s.p->grad.data(), s.vel.data(), lr, momentum_,
                                   weight_decay_);
    }
}

void SgdMomentum::zero_grad() {
    for (auto& s : slots_) s.p->grad.fill(0.0);
}

double CosineSchedule::lr_at(i64 step) const {
    if (warmup_steps > 0 && step < warmup_steps)
        return base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
    const i64 span = total_steps - warmup_steps;
    if (span <= 0) return final_lr;
    const double t = static_cast<double>(step - warmup_steps) / static_cast<double>(span);
    const double clamped = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
    return final_lr + 0.5 * (base_lr - final_lr) * (1.0 + std::cos(M_PI * clamped));
}

}  // namespace latkit::nn
