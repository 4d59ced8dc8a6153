#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "latkit/core/tensor.hpp"
#include "latkit/gen/mlvgm.hpp"
#include "latkit/views/views.hpp"

namespace latkit::cs {

// Names the random stream of one training worker. The subseed hashes
// (base_seed, iteration, replica) together, so distinct iterations or
// replicas never share a stream. `iteration` is a cursor: streams advance it
// as they yield, while batch producers take the effective iteration
// explicitly.
struct SeedPolicy {
    std::uint64_t base_seed = 0;
    std::uint64_t replica = 0;
    i64 iteration = 0;

    std::uint64_t subseed(i64 iteration) const;
    std::uint64_t subseed() const { return subseed(iteration); }
};

// What one training step consumes: B anchor/positive pairs perturbed per the
// plan. B = 0 is the degenerate empty batch (legal for producers, useless
// for training); steps_per_epoch fixes the schedule length so epochs stay
// comparable to dataset-backed training.
struct BatchSpec {
    i64 batch = 1;
    views::PerturbationPlan plan;
    i64 steps_per_epoch = 1;

    // ParamError on violation; also validates the plan against the spec.
    void validate(const gen::LatentSpec& spec) const;
};

// One freshly generated batch, a pure function of (policy, iteration): the
// same triple always reproduces the same bits, and nothing touches durable
// storage. The generator runs inference only; its parameters are never
// updated here. PlacementError unless the generator lives on
// consumer_device.
std::pair<Tensor, Tensor> cs_batch(gen::GeneratorHandle& generator,
                                   const BatchSpec& spec,
                                   const SeedPolicy& policy, i64 iteration,
                                   const std::string& consumer_device = "cpu");

// Yields exactly steps_per_epoch batches for one epoch. Batches are indexed
// by global iteration = epoch * steps_per_epoch + step, so a stream resumed
// at any (epoch, step) reproduces what an uninterrupted run would have
// produced there. With lookahead, each next() hands out a batch generated
// one call earlier (same bits, producer runs one step ahead).
class EpochStream {
public:
    EpochStream(gen::GeneratorHandle& generator, BatchSpec spec,
                SeedPolicy policy, i64 epoch, bool lookahead = false,
                std::string consumer_device = "cpu");

    bool done() const { return step_ >= spec_.steps_per_epoch; }
    i64 remaining() const { return spec_.steps_per_epoch - step_; }
    // Global iteration of the batch next() would return.
    i64 iteration() const;

    // Next batch; ParamError once the epoch is exhausted.
    std::pair<Tensor, Tensor> next();

    // Reposition to `step` within the epoch (0 = first batch; steps_per_epoch
    // = exhausted). ParamError outside that range.
    void seek(i64 step);

private:
    void refill();

    gen::GeneratorHandle& generator_;
    BatchSpec spec_;
    SeedPolicy policy_;
    i64 epoch_;
    i64 step_ = 0;
    bool lookahead_;
    std::string consumer_device_;
    std::optional<std::pair<Tensor, Tensor>> buffer_;
};

EpochStream epoch_stream(gen::GeneratorHandle& generator, BatchSpec spec,
                         SeedPolicy policy, i64 epoch);

}  // namespace latkit::cs
