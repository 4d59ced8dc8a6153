// Continuous batch sampling: subseed separation, bitwise batch determinism,
// freshness (no latent collisions within or across streams), epoch stream
// counting, lookahead equivalence, resume-at-step replay, device placement,
// and the zero-persistence sentinel.
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <memory>
#include <set>
#include <vector>

#include "latkit/core/errors.hpp"
#include "latkit/cs/sampler.hpp"
#include "latkit/gen/linear.hpp"

using namespace latkit;
using namespace latkit::cs;

namespace {

// One scalar latent per level on its own output axis; with eps = 0 the image
// is an invertible linear map of the latent draw, so exact-match collision
// scans over images are collision scans over latents.
std::unique_ptr<gen::LinearGaussianMLVGM> axis_model(std::vector<double> s,
                                                     i64 d) {
    gen::LatentSpec spec;
    spec.n_levels = static_cast<i64>(s.size());
    spec.dims.assign(s.size(), 1);
    std::vector<Tensor> a;
    for (size_t i = 0; i < s.size(); ++i) {
        Tensor ai({d, 1});
        ai[static_cast<i64>(i)] = s[i];
        a.push_back(std::move(ai));
    }
    return std::make_unique<gen::LinearGaussianMLVGM>(spec, std::move(a), 0.0);
}

BatchSpec make_spec(i64 batch, i64 steps, i64 n_levels) {
    BatchSpec spec;
    spec.batch = batch;
    spec.steps_per_epoch = steps;
    spec.plan.levels.resize(static_cast<size_t>(n_levels));
    spec.plan.levels.back().strategy = views::Strategy::resample;
    return spec;
}

bool same_values(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    for (i64 i = 0; i < a.numel(); ++i)
        if (a[i] != b[i]) return false;
    return true;
}

// Anchor rows as flat vectors, for exact-match collision scans.
void collect_rows(const Tensor& batch, std::vector<std::vector<double>>& out) {
    const i64 b = batch.dim(0), d = batch.numel() / std::max<i64>(b, 1);
    for (i64 r = 0; r < b; ++r)
        out.emplace_back(batch.data() + r * d, batch.data() + (r + 1) * d);
}

i64 duplicate_count(std::vector<std::vector<double>> rows) {
    std::sort(rows.begin(), rows.end());
    i64 dups = 0;
    for (size_t i = 1; i < rows.size(); ++i)
        if (rows[i] == rows[i - 1]) ++dups;
    return dups;
}

}  // namespace

TEST_CASE("subseeds separate iterations and replicas") {
    SeedPolicy p;
    p.base_seed = 42;
    std::set<std::uint64_t> seen;
    for (i64 it = 0; it < 100; ++it) {
        for (std::uint64_t rep = 0; rep < 4; ++rep) {
            p.replica = rep;
            seen.insert(p.subseed(it));
        }
    }
    CHECK(seen.size() == 400);

    // The cursor form matches the explicit form.
    p.replica = 1;
    p.iteration = 17;
    CHECK(p.subseed() == p.subseed(17));

    // A different base seed relocates every stream.
    SeedPolicy q = p;
    q.base_seed = 43;
    CHECK(q.subseed(17) != p.subseed(17));
}

TEST_CASE("identical policy and iteration reproduce the batch bitwise") {
    auto model = axis_model({4.0, 2.0}, 2);
    const BatchSpec spec = make_spec(8, 10, 2);
    SeedPolicy policy;
    policy.base_seed = 7;

    auto [a1, p1] = cs_batch(*model, spec, policy, 5);
    auto [a2, p2] = cs_batch(*model, spec, policy, 5);
    CHECK(same_values(a1, a2));
    CHECK(same_values(p1, p2));

    auto [a3, p3] = cs_batch(*model, spec, policy, 6);
    CHECK(!same_values(a1, a3));

    SeedPolicy other = policy;
    other.replica = 1;
    auto [a4, p4] = cs_batch(*model, spec, other, 5);
    CHECK(!same_values(a1, a4));
}

TEST_CASE("an empty batch is legal and empty") {
    auto model = axis_model({4.0, 2.0}, 2);
    const BatchSpec spec = make_spec(0, 1, 2);
    auto [anchor, positive] = cs_batch(*model, spec, SeedPolicy{}, 0);
    CHECK(anchor.shape() == std::vector<i64>{0, 1, 1, 2});
    CHECK(positive.shape() == std::vector<i64>{0, 1, 1, 2});
}

TEST_CASE("spec validation") {
    auto model = axis_model({4.0, 2.0}, 2);
    BatchSpec spec = make_spec(4, 5, 2);
    CHECK_NOTHROW(spec.validate(model->spec()));

    SUBCASE("negative batch") {
        spec.batch = -1;
        CHECK_THROWS_AS(spec.validate(model->spec()), ParamError);
    }
    SUBCASE("zero steps") {
        spec.steps_per_epoch = 0;
        CHECK_THROWS_AS(spec.validate(model->spec()), ParamError);
    }
    SUBCASE("plan level mismatch") {
        spec.plan.levels.resize(1);
        CHECK_THROWS_AS(cs_batch(*model, spec, SeedPolicy{}, 0), ParamError);
    }
}

TEST_CASE("batches land on the consumer's device or not at all") {
    auto model = axis_model({4.0, 2.0}, 2);
    const BatchSpec spec = make_spec(2, 1, 2);
    CHECK_NOTHROW(cs_batch(*model, spec, SeedPolicy{}, 0, "cpu"));
    CHECK_THROWS_AS(cs_batch(*model, spec, SeedPolicy{}, 0, "cuda:0"),
                    PlacementError);
}

TEST_CASE("a thousand iterations never repeat an anchor latent") {
    auto model = axis_model({4.0, 2.0}, 2);
    const BatchSpec spec = make_spec(4, 1000, 2);
    SeedPolicy policy;
    policy.base_seed = 11;

    std::vector<std::vector<double>> rows;
    rows.reserve(4000);
    for (i64 it = 0; it < 1000; ++it) {
        auto [anchor, positive] = cs_batch(*model, spec, policy, it);
        collect_rows(anchor, rows);
    }
    CHECK(rows.size() == 4000);
    CHECK(duplicate_count(std::move(rows)) == 0);
}

TEST_CASE("replica streams are disjoint in their draws") {
    auto model = axis_model({4.0, 2.0}, 2);
    const BatchSpec spec = make_spec(8, 50, 2);

    std::vector<std::vector<double>> rows;
    for (std::uint64_t rep = 0; rep < 2; ++rep) {
        SeedPolicy policy;
        policy.base_seed = 3;
        policy.replica = rep;
        EpochStream stream(*model, spec, policy, 0);
        while (!stream.done()) {
            auto [anchor, positive] = stream.next();
            collect_rows(anchor, rows);
        }
    }
    CHECK(rows.size() == 2 * 50 * 8);
    CHECK(duplicate_count(std::move(rows)) == 0);
}

TEST_CASE("an epoch yields exactly its scheduled batches") {
    auto model = axis_model({4.0, 2.0}, 2);
    const BatchSpec spec = make_spec(4, 10, 2);
    EpochStream stream = epoch_stream(*model, spec, SeedPolicy{}, 0);

    i64 batches = 0, pairs = 0;
    while (!stream.done()) {
        CHECK(stream.remaining() == 10 - batches);
        auto [anchor, positive] = stream.next();
        CHECK(anchor.dim(0) == 4);
        CHECK(positive.dim(0) == 4);
        ++batches;
        pairs += anchor.dim(0);
    }
    CHECK(batches == 10);
    CHECK(pairs == 40);
    CHECK(stream.remaining() == 0);
    CHECK_THROWS_AS(stream.next(), ParamError);

    // Fresh images across epochs: three epochs share no anchor rows.
    std::vector<std::vector<double>> rows;
    for (i64 epoch = 0; epoch < 3; ++epoch) {
        EpochStream es = epoch_stream(*model, spec, SeedPolicy{}, epoch);
        while (!es.done()) collect_rows(es.next().first, rows);
    }
    CHECK(rows.size() == 3 * 10 * 4);
    CHECK(duplicate_count(std::move(rows)) == 0);
}

TEST_CASE("streams replay cs_batch exactly and report their iteration") {
    auto model = axis_model({4.0, 2.0}, 2);
    const BatchSpec spec = make_spec(3, 5, 2);
    SeedPolicy policy;
    policy.base_seed = 21;

    EpochStream stream(*model, spec, policy, 2);
    for (i64 step = 0; step < 5; ++step) {
        CHECK(stream.iteration() == 2 * 5 + step);
        auto [anchor, positive] = stream.next();
        auto [ea, ep] = cs_batch(*model, spec, policy, 2 * 5 + step);
        CHECK(same_values(anchor, ea));
        CHECK(same_values(positive, ep));
    }
}

TEST_CASE("resuming mid-epoch reproduces the uninterrupted run") {
    auto model = axis_model({4.0, 2.0}, 2);
    const BatchSpec spec = make_spec(4, 8, 2);
    SeedPolicy policy;
    policy.base_seed = 9;

    // Uninterrupted pass over epoch 1, recording every batch.
    std::vector<std::pair<Tensor, Tensor>> recorded;
    EpochStream full(*model, spec, policy, 1);
    while (!full.done()) recorded.push_back(full.next());

    // Resume at step 5 of epoch 1.
    EpochStream resumed(*model, spec, policy, 1);
    resumed.seek(5);
    CHECK(resumed.iteration() == 8 + 5);
    for (i64 step = 5; step < 8; ++step) {
        auto [anchor, positive] = resumed.next();
        CHECK(same_values(anchor, recorded[static_cast<size_t>(step)].first));
        CHECK(
            same_values(positive, recorded[static_cast<size_t>(step)].second));
    }
    CHECK(resumed.done());

    SUBCASE("seek bounds") {
        EpochStream s(*model, spec, policy, 1);
        CHECK_NOTHROW(s.seek(8));
        CHECK(s.done());
        CHECK_THROWS_AS(s.seek(9), ParamError);
        CHECK_THROWS_AS(s.seek(-1), ParamError);
    }
}

TEST_CASE("lookahead changes scheduling, not bits") {
    auto model = axis_model({4.0, 2.0}, 2);
    const BatchSpec spec = make_spec(4, 6, 2);
    SeedPolicy policy;
    policy.base_seed = 33;

    EpochStream plain(*model, spec, policy, 0, false);
    EpochStream ahead(*model, spec, policy, 0, true);
    while (!plain.done()) {
        auto [pa, pp] = plain.next();
        auto [aa, ap] = ahead.next();
        CHECK(same_values(pa, aa));
        CHECK(same_values(pp, ap));
    }
    CHECK(ahead.done());
    // Seek keeps the buffered batch consistent too.
    EpochStream seeker(*model, spec, policy, 0, true);
    seeker.seek(3);
    EpochStream target(*model, spec, policy, 0, false);
    target.seek(3);
    CHECK(same_values(seeker.next().first, target.next().first));
}

TEST_CASE("streaming writes nothing to durable storage") {
    namespace fs = std::filesystem;
    const fs::path sentinel =
        fs::temp_directory_path() / "latkit_cs_sentinel";
    fs::remove_all(sentinel);
    fs::create_directories(sentinel);
    const fs::path before = fs::current_path();
    fs::current_path(sentinel);

    auto model = axis_model({4.0, 2.0}, 2);
    const BatchSpec spec = make_spec(16, 20, 2);
    for (i64 epoch = 0; epoch < 2; ++epoch) {
        EpochStream stream = epoch_stream(*model, spec, SeedPolicy{}, epoch);
        while (!stream.done()) stream.next();
    }

    i64 entries = 0;
    for (const auto& e : fs::recursive_directory_iterator(sentinel)) {
        (void)e;
        ++entries;
    }
    fs::current_path(before);
    fs::remove_all(sentinel);
    CHECK(entries == 0);
}
