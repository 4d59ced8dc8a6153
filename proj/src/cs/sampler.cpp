#include "latkit/cs/sampler.hpp"

#include "latkit/core/errors.hpp"
#include "latkit/core/rng.hpp"

namespace latkit::cs {

namespace {
constexpr std::uint64_t kStreamTag = 0x63736274ull;
}

std::uint64_t SeedPolicy::subseed(i64 iteration) const {
    return seed_mix({kStreamTag, base_seed,
                     static_cast<std::uint64_t>(iteration), replica});
}

void BatchSpec::validate(const gen::LatentSpec& spec) const {
    if (batch < 0) throw ParamError("BatchSpec: batch must be >= 0");
    if (steps_per_epoch < 1)
        throw ParamError("BatchSpec: steps_per_epoch must be >= 1");
    plan.validate(spec);
}

std::pair<Tensor, Tensor> cs_batch(gen::GeneratorHandle& generator,
                                   const BatchSpec& spec,
                                   const SeedPolicy& policy, i64 iteration,
                                   const std::string& consumer_device) {
    spec.validate(generator.spec());
    if (generator.device() != consumer_device)
        throw PlacementError("cs_batch: generator on " + generator.device() +
                             ", consumer on " + consumer_device);
    return views::sample_view_batch(generator, spec.plan, spec.batch,
                                    policy.subseed(iteration));
}

EpochStream::EpochStream(gen::GeneratorHandle& generator, BatchSpec spec,
                         SeedPolicy policy, i64 epoch, bool lookahead,
                         std::string consumer_device)
    : generator_(generator),
      spec_(std::move(spec)),
      policy_(std::move(policy)),
      epoch_(epoch),
      lookahead_(lookahead),
      consumer_device_(std::move(consumer_device)) {
    if (epoch_ < 0) throw ParamError("EpochStream: epoch must be >= 0");
    spec_.validate(generator_.spec());
    refill();
}

i64 EpochStream::iteration() const {
    return epoch_ * spec_.steps_per_epoch + step_;
}

void EpochStream::refill() {
    policy_.iteration = iteration();
    if (lookahead_ && !done())
        buffer_ = cs_batch(generator_, spec_, policy_, policy_.iteration,
                           consumer_device_);
    else
        buffer_.reset();
}

std::pair<Tensor, Tensor> EpochStream::next() {
    if (done()) throw ParamError("EpochStream: epoch exhausted");
    std::pair<Tensor, Tensor> out =
        buffer_ ? std::move(*buffer_)
                : cs_batch(generator_, spec_, policy_, iteration(),
                           consumer_device_);
    ++step_;
    refill();
    return out;
}

void EpochStream::seek(i64 step) {
    if (step < 0 || step > spec_.steps_per_epoch)
        throw ParamError("EpochStream: seek outside the epoch");
    step_ = step;
    refill();
}

EpochStream epoch_stream(gen::GeneratorHandle& generator, BatchSpec spec,
                         SeedPolicy policy, i64 epoch) {
    return EpochStream(generator, std::move(spec), std::move(policy), epoch);
}

}  // namespace latkit::cs
