#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "latkit/gen/mlvgm.hpp"
#include "latkit/probe/probe.hpp"

namespace latkit::mc {

// First two moments of the perturbation magnitude over sampled anchors.
struct MagnitudeEstimate {
    double mu;     // mean row magnitude
    double sigma;  // sample standard deviation (n - 1 denominator)
    i64 n;
};

// Row magnitude hook; receives one anchor's perturbation vector. The default
// (an empty function) is the L2 norm, which is what reports quote.
using RowNorm = std::function<double(const double* row, i64 dim)>;

// Monte Carlo estimate of mean and std of ||p(z)||_2 over n anchors with
// i.i.d. truncated-normal components. Anchors are drawn in fixed-size blocks,
// each from its own stream derived from (seed, block index), so the result
// never depends on thread count or batching. ParamError for n < 2 or invalid
// anchor parameters.
MagnitudeEstimate estimate_magnitudes(
    probe::PerturbationNet& net, const gen::TruncatedNormalParams& anchor_dist,
    i64 n, std::uint64_t seed, const RowNorm& norm = {});

// One table row of the per-level report.
struct MCRow {
    i64 level;
    double loss;  // the probe's final window-mean contrastive loss
    double mu;
    double sigma;
    i64 n;
    std::string status;  // probe termination status name
};

MCRow make_row(const probe::ProbeResult& result, const MagnitudeEstimate& est);

// Per-level magnitude table. Degenerate levels stay visible in the rows,
// flagged by their status, so they are never silently folded into cross-level
// comparisons.
struct MCReport {
    std::vector<MCRow> rows;

    // SchemaError unless there is at least one row, levels are strictly
    // increasing, and every row has finite numbers, sigma >= 0, n > 0, and a
    // known status.
    void validate() const;

    std::string to_json() const;  // canonical serialization, ends in newline
    // SchemaError on malformed text, unknown keys, or invariant violations.
    static MCReport from_json(const std::string& text);
    // Aligned text rendering with the column order {level, loss, mu, sigma,
    // n, status}.
    std::string to_table() const;
};

// Sorts rows by level, validates, writes <dir>/report.json and
// <dir>/report.txt, and returns the assembled report. When expected_levels
// is >= 0 the rows must cover levels 0..expected_levels-1 exactly
// (SchemaError otherwise). IoError when writing fails.
MCReport build_report(std::vector<MCRow> rows,
                      const std::filesystem::path& dir,
                      i64 expected_levels = -1);

// Reads and validates a serialized report. IoError when the file cannot be
// read, SchemaError when its content is invalid.
MCReport read_report(const std::filesystem::path& json_file);

}  // namespace latkit::mc
