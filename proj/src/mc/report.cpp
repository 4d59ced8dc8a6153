#include "latkit/mc/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "latkit/core/errors.hpp"
#include "latkit/core/rng.hpp"

namespace latkit::mc {

namespace {

constexpr std::uint64_t kAnchorBlockTag = 0x6d63616eull;

// Fixed block size: anchors for block b always come from the same derived
// stream, so the estimate is identical across thread counts and batchings.
constexpr i64 kBlockRows = 4096;

std::string fmt_fixed(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw IoError("mc report: cannot write " + path.string());
}

}  // namespace

MagnitudeEstimate estimate_magnitudes(
    probe::PerturbationNet& net, const gen::TruncatedNormalParams& anchor_dist,
    i64 n, std::uint64_t seed, const RowNorm& norm) {
    if (n < 2) throw ParamError("estimate_magnitudes: n must be >= 2");
    if (!(anchor_dist.std > 0.0))
        throw ParamError("estimate_magnitudes: anchor std must be > 0");
    if (!(anchor_dist.trunc > 0.0))
        throw ParamError("estimate_magnitudes: anchor trunc must be > 0");

    const i64 dim = net.dim();
    long double mean = 0.0L, m2 = 0.0L;  // Welford, exact zero on constants
    i64 seen = 0;
    for (i64 block = 0; block * kBlockRows < n; ++block) {
        const i64 rows = std::min(kBlockRows, n - block * kBlockRows);
        Tensor z({rows, dim});
        fill_truncated_normal(
            z.data(), z.numel(), anchor_dist.mean, anchor_dist.std,
            anchor_dist.trunc,
            seed_mix({seed, kAnchorBlockTag,
                      static_cast<std::uint64_t>(block)}));
        Tensor p = net.perturbation(z, false);
        for (i64 r = 0; r < rows; ++r) {
            double x;
            if (norm) {
                x = norm(p.data() + r * dim, dim);
            } else {
                long double s = 0.0L;
                for (i64 c = 0; c < dim; ++c) {
                    const long double v = p[r * dim + c];
                    s += v * v;
                }
                x = static_cast<double>(sqrtl(s));
            }
            ++seen;
            const long double delta = x - mean;
            mean += delta / seen;
            m2 += delta * (x - mean);
        }
    }
    if (m2 < 0.0L) m2 = 0.0L;
    return {static_cast<double>(mean),
            std::sqrt(static_cast<double>(m2 / (n - 1))), n};
}

MCRow make_row(const probe::ProbeResult& result, const MagnitudeEstimate& est) {
    return {result.level,     result.final_window_mean,
            est.mu,           est.sigma,
            est.n,            probe::to_string(result.status)};
}

void MCReport::validate() const {
    if (rows.empty()) throw SchemaError("mc report: no rows");
    for (size_t i = 0; i < rows.size(); ++i) {
        const MCRow& r = rows[i];
        const std::string at = " in level " + std::to_string(r.level);
        if (r.level < 0) throw SchemaError("mc report: negative level");
        if (i > 0 && rows[i - 1].level >= r.level)
            throw SchemaError("mc report: duplicate or unordered level " +
                              std::to_string(r.level));
        if (!std::isfinite(r.loss) || !std::isfinite(r.mu) ||
            !std::isfinite(r.sigma))
            throw SchemaError("mc report: non-finite value" + at);
        if (r.sigma < 0.0) throw SchemaError("mc report: negative sigma" + at);
        if (r.n <= 0) throw SchemaError("mc report: n must be > 0" + at);
        if (r.status != "converged" && r.status != "degenerate")
            throw SchemaError("mc report: unknown status '" + r.status + "'" +
                              at);
    }
}

std::string MCReport::to_json() const {
    nlohmann::ordered_json j;
    j["kind"] = "mc_report";
    j["rows"] = nlohmann::ordered_json::array();
    for (const MCRow& r : rows) {
        nlohmann::ordered_json row;
        row["level"] = r.level;
        row["loss"] = r.loss;
        row["mu"] = r.mu;
        row["sigma"] = r.sigma;
        row["n"] = r.n;
        row["status"] = r.status;
        j["rows"].push_back(std::move(row));
    }
    return j.dump(2) + "\n";
}

MCReport MCReport::from_json(const std::string& text) {
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("mc report: ") + e.what());
    }
    if (!j.is_object())
        throw SchemaError("mc report: top level must be an object");
    for (const auto& item : j.items())
        if (item.key() != "kind" && item.key() != "rows")
            throw SchemaError("mc report: unknown key '" + item.key() + "'");
    if (!j.contains("kind") || j["kind"] != "mc_report")
        throw SchemaError("mc report: kind must be 'mc_report'");
    if (!j.contains("rows") || !j["rows"].is_array())
        throw SchemaError("mc report: rows must be an array");

    static const std::array<const char*, 6> keys = {"level", "loss",  "mu",
                                                    "sigma", "n",     "status"};
    MCReport report;
    for (const auto& e : j["rows"]) {
        if (!e.is_object()) throw SchemaError("mc report: row must be an object");
        for (const auto& item : e.items()) {
            bool known = false;
            for (const char* k : keys) known = known || item.key() == k;
            if (!known)
                throw SchemaError("mc report: unknown row key '" + item.key() +
                                  "'");
        }
        for (const char* k : keys)
            if (!e.contains(k))
                throw SchemaError(std::string("mc report: row missing '") + k +
                                  "'");
        if (!e["level"].is_number_integer() || !e["n"].is_number_integer() ||
            !e["loss"].is_number() || !e["mu"].is_number() ||
            !e["sigma"].is_number() || !e["status"].is_string())
            throw SchemaError("mc report: row field has the wrong type");
        report.rows.push_back({e["level"].get<i64>(), e["loss"].get<double>(),
                               e["mu"].get<double>(), e["sigma"].get<double>(),
                               e["n"].get<i64>(),
                               e["status"].get<std::string>()});
    }
    report.validate();
    return report;
}

std::string MCReport::to_table() const {
    static const std::array<const char*, 6> headers = {"level", "loss",  "mu",
                                                       "sigma", "n",
                                                       "status"};
    std::vector<std::array<std::string, 6>> cells;
    for (const MCRow& r : rows)
        cells.push_back({std::to_string(r.level), fmt_fixed(r.loss),
                         fmt_fixed(r.mu), fmt_fixed(r.sigma),
                         std::to_string(r.n), r.status});
    std::array<size_t, 6> width{};
    for (size_t c = 0; c < 6; ++c) {
        width[c] = std::strlen(headers[c]);
        for (const auto& row : cells)
            width[c] = std::max(width[c], row[c].size());
    }
    std::ostringstream out;
    auto emit = [&](const std::array<std::string, 6>& row) {
        for (size_t c = 0; c < 6; ++c) {
            if (c) out << "  ";
            out << std::string(width[c] - row[c].size(), ' ') << row[c];
        }
        out << "\n";
    };
    emit({headers[0], headers[1], headers[2], headers[3], headers[4],
          headers[5]});
    for (const auto& row : cells) emit(row);
    return out.str();
}

MCReport build_report(std::vector<MCRow> rows,
                      const std::filesystem::path& dir, i64 expected_levels) {
    std::sort(rows.begin(), rows.end(),
              [](const MCRow& a, const MCRow& b) { return a.level < b.level; });
    MCReport report{std::move(rows)};
    report.validate();
    if (expected_levels >= 0) {
        if (static_cast<i64>(report.rows.size()) != expected_levels)
            throw SchemaError(
                "mc report: expected " + std::to_string(expected_levels) +
                " levels, got " + std::to_string(report.rows.size()));
        for (i64 i = 0; i < expected_levels; ++i)
            if (report.rows[static_cast<size_t>(i)].level != i)
                throw SchemaError("mc report: missing level " +
                                  std::to_string(i));
    }
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw IoError("mc report: cannot create directory " + dir.string());
    write_text_file(dir / "report.json", report.to_json());
    write_text_file(dir / "report.txt", report.to_table());
    return report;
}

MCReport read_report(const std::filesystem::path& json_file) {
    std::ifstream in(json_file, std::ios::binary);
    if (!in) throw IoError("mc report: cannot read " + json_file.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (!in) throw IoError("mc report: cannot read " + json_file.string());
    return MCReport::from_json(buf.str());
}

}  // namespace latkit::mc
