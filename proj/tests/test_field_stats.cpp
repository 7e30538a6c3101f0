#include <doctest.h>

#include <memory>

#include "instat/field/field_stats.hpp"
#include "instat/rng.hpp"
#include "instat/stats/moments.hpp"
#include "oracle.hpp"

using namespace instat;
using field::FieldStatistics;
using field::Statistic;

namespace {

std::shared_ptr<const stats::StatisticsConfig> make_cfg(std::vector<double> alphas,
                                                        std::vector<double> thresholds,
                                                        std::uint64_t declared_n) {
    auto cfg = std::make_shared<stats::StatisticsConfig>();
    cfg->quantile_orders = std::move(alphas);
    cfg->thresholds = std::move(thresholds);
    cfg->declared_n = declared_n;
    return cfg;
}

} // namespace

TEST_CASE("field stats: first sample seeds the quantile estimators") {
    FieldStatistics fs("dye", {0, 4}, 2, make_cfg({0.5}, {}, 10));
    const double chunk[] = {0.3, 0.1, 0.2, 0.4};
    fs.ingest_chunk(0, 0, chunk);
    CHECK(fs.quantile_at(0, 0, 0.5) == 0.3);
    CHECK(fs.count_at(0, 0) == 1);
    CHECK(fs.count_at(3, 0) == 1);
    CHECK(fs.count_at(0, 1) == 0); // other timestep untouched
}

TEST_CASE("field stats: disjoint chunks keep per-cell counts independent") {
    FieldStatistics fs("dye", {10, 20}, 1, make_cfg({0.5}, {}, 10));
    const double a[] = {1.0, 2.0};
    const double b[] = {3.0, 4.0, 5.0};
    fs.ingest_chunk(0, 10, a);
    fs.ingest_chunk(0, 15, b);
    fs.ingest_chunk(0, 15, b);
    CHECK(fs.count_at(10, 0) == 1);
    CHECK(fs.count_at(11, 0) == 1);
    CHECK(fs.count_at(12, 0) == 0);
    CHECK(fs.count_at(15, 0) == 2);
    CHECK(fs.count_at(17, 0) == 2);
}

TEST_CASE("field stats: ingest validation") {
    FieldStatistics fs("dye", {0, 4}, 2, make_cfg({0.5}, {}, 10));
    const double chunk[] = {1.0, 2.0};
    CHECK_THROWS_AS(fs.ingest_chunk(2, 0, chunk), ProtocolError);  // bad timestep
    CHECK_THROWS_AS(fs.ingest_chunk(0, 3, chunk), ProtocolError);  // spills out of range
    const double bad[] = {1.0, NAN};
    try {
        fs.ingest_chunk(0, 2, bad);
        FAIL("expected DataQualityError");
    } catch (const DataQualityError& e) {
        CHECK(e.has_position());
        CHECK(e.cell() == 3);
        CHECK(e.timestep() == 0);
    }
    // The failed chunk must not have been half-applied.
    CHECK(fs.count_at(2, 0) == 0);
}

TEST_CASE("field stats: streamed moments match stored-sample oracle per cell") {
    const std::uint32_t n_samples = 100;
    const std::uint64_t n_cells = 4;
    const std::uint32_t n_t = 2;
    FieldStatistics fs("dye", {0, n_cells}, n_t, make_cfg({0.25, 0.75}, {0.5}, n_samples));

    CounterRng rng(808, 0);
    std::uint64_t c = 0;
    // samples[t][cell][k]
    std::vector<std::vector<std::vector<double>>> samples(
        n_t, std::vector<std::vector<double>>(n_cells));
    for (std::uint32_t k = 0; k < n_samples; ++k) {
        for (std::uint32_t t = 0; t < n_t; ++t) {
            std::vector<double> chunk(n_cells);
            for (std::uint64_t cell = 0; cell < n_cells; ++cell) {
                chunk[cell] = rng.uniform(c++) * (cell + 1.0);
                samples[t][cell].push_back(chunk[cell]);
            }
            fs.ingest_chunk(t, 0, chunk);
        }
    }

    for (std::uint32_t t = 0; t < n_t; ++t) {
        const auto mean = fs.snapshot(Statistic::mean(), t);
        const auto variance = fs.snapshot(Statistic::variance(), t);
        const auto mn = fs.snapshot(Statistic::min(), t);
        const auto mx = fs.snapshot(Statistic::max(), t);
        const auto exceed = fs.snapshot(Statistic::exceedance(0.5), t);
        for (std::uint64_t cell = 0; cell < n_cells; ++cell) {
            const auto batch = oracle::batch_moments(samples[t][cell]);
            CHECK(oracle::rel_err(mean[cell], batch.mean) <= 1e-12);
            CHECK(oracle::rel_err(variance[cell], batch.variance()) <= 1e-12);
            CHECK(mn[cell] == batch.min);
            CHECK(mx[cell] == batch.max);
            CHECK(exceed[cell] ==
                  doctest::Approx(oracle::batch_exceedance(samples[t][cell], 0.5)));
        }
    }
}

TEST_CASE("field stats: snapshot preconditions and quantile selection") {
    FieldStatistics fs("dye", {0, 2}, 1, make_cfg({0.25, 0.75}, {}, 10));
    CHECK_THROWS_AS(fs.snapshot(Statistic::mean(), 0), StatError); // counts 0
    const double chunk[] = {0.0, 0.0};
    fs.ingest_chunk(0, 0, chunk);
    CHECK_THROWS_AS(fs.snapshot(Statistic::variance(), 0), StatError); // needs 2
    CHECK(fs.snapshot(Statistic::min(), 0) == std::vector<double>{0.0, 0.0});
    CHECK_THROWS_AS(fs.snapshot(Statistic::quantile(0.5), 0), StatError); // unconfigured
    CHECK_THROWS_AS(fs.snapshot(Statistic::exceedance(1.0), 0), StatError);
}

TEST_CASE("field stats: constant-zero field has all-zero min/max/quantile maps") {
    FieldStatistics fs("dye", {0, 8}, 1, make_cfg({0.25, 0.75}, {}, 4));
    const std::vector<double> zeros(8, 0.0);
    for (int k = 0; k < 4; ++k) fs.ingest_chunk(0, 0, zeros);
    CHECK(fs.snapshot(Statistic::min(), 0) == zeros);
    CHECK(fs.snapshot(Statistic::max(), 0) == zeros);
    // Inter-percentile range via two snapshots, clamped by the caller.
    const auto lo = fs.snapshot(Statistic::quantile(0.25), 0);
    const auto hi = fs.snapshot(Statistic::quantile(0.75), 0);
    for (std::size_t i = 0; i < 8; ++i) {
        CHECK(std::max(0.0, hi[i] - lo[i]) <= 1.0);
    }
}

TEST_CASE("field stats: chunk-order invariance for commutative statistics") {
    const std::uint64_t n_cells = 16;
    const std::uint32_t n_t = 3;
    const std::uint32_t n_sims = 20;
    auto cfg = make_cfg({0.5, 0.9}, {0.3}, n_sims);

    struct Chunk {
        std::uint32_t t;
        std::vector<double> values;
    };
    CounterRng rng(4711, 0);
    std::uint64_t c = 0;
    std::vector<Chunk> chunks;
    for (std::uint32_t s = 0; s < n_sims; ++s) {
        for (std::uint32_t t = 0; t < n_t; ++t) {
            Chunk ch;
            ch.t = t;
            ch.values.resize(n_cells);
            for (auto& v : ch.values) v = rng.uniform(c++);
            chunks.push_back(std::move(ch));
        }
    }

    FieldStatistics forward("dye", {0, n_cells}, n_t, cfg);
    for (const auto& ch : chunks) forward.ingest_chunk(ch.t, 0, ch.values);

    auto shuffled = chunks;
    for (std::size_t i = shuffled.size() - 1; i > 0; --i)
        std::swap(shuffled[i], shuffled[rng.below(c++, i + 1)]);
    FieldStatistics permuted("dye", {0, n_cells}, n_t, cfg);
    for (const auto& ch : shuffled) permuted.ingest_chunk(ch.t, 0, ch.values);

    for (std::uint32_t t = 0; t < n_t; ++t) {
        const auto m1 = forward.snapshot(Statistic::mean(), t);
        const auto m2 = permuted.snapshot(Statistic::mean(), t);
        const auto v1 = forward.snapshot(Statistic::variance(), t);
        const auto v2 = permuted.snapshot(Statistic::variance(), t);
        for (std::uint64_t i = 0; i < n_cells; ++i) {
            CHECK(oracle::rel_err(m2[i], m1[i]) <= 1e-9);
            CHECK(oracle::rel_err(v2[i], v1[i]) <= 1e-9);
        }
        CHECK(forward.snapshot(Statistic::min(), t) == permuted.snapshot(Statistic::min(), t));
        CHECK(forward.snapshot(Statistic::max(), t) == permuted.snapshot(Statistic::max(), t));
        CHECK(forward.snapshot(Statistic::exceedance(0.3), t) ==
              permuted.snapshot(Statistic::exceedance(0.3), t));
        CHECK(forward.snapshot(Statistic::count(), t) ==
              permuted.snapshot(Statistic::count(), t));
    }
}

TEST_CASE("field stats: footprint is fixed at construction") {
    FieldStatistics fs("dye", {0, 64}, 4, make_cfg({0.1, 0.5, 0.9}, {0.2}, 100));
    const std::size_t before = fs.footprint_bytes();
    std::vector<double> chunk(64);
    CounterRng rng(5, 0);
    for (std::uint32_t k = 0; k < 100; ++k) {
        for (std::size_t i = 0; i < chunk.size(); ++i) chunk[i] = rng.uniform(k * 64 + i);
        for (std::uint32_t t = 0; t < 4; ++t) fs.ingest_chunk(t, 0, chunk);
        if (k == 9) CHECK(fs.footprint_bytes() == before);
    }
    CHECK(fs.footprint_bytes() == before);
}

TEST_CASE("field stats: serialize/restore round-trip preserves state bitwise") {
    auto cfg = make_cfg({0.25, 0.5}, {0.1}, 50);
    FieldStatistics fs("dye", {5, 21}, 2, cfg);
    CounterRng rng(21, 0);
    std::vector<double> chunk(16);
    std::uint64_t c = 0;
    for (int k = 0; k < 17; ++k) {
        for (auto& v : chunk) v = rng.uniform(c++);
        fs.ingest_chunk(k % 2, 5, chunk);
    }

    ByteWriter w;
    fs.serialize(w);
    const auto bytes = w.take();

    FieldStatistics restored("dye", {5, 21}, 2, cfg);
    ByteReader r(bytes);
    restored.restore(r);
    CHECK(fs.state_equals(restored));

    FieldStatistics wrong("dye", {5, 20}, 2, cfg);
    ByteReader r2(bytes);
    CHECK_THROWS_AS(wrong.restore(r2), CheckpointError);
}

TEST_CASE("field stats: rm state matches a standalone estimator fed the same stream") {
    auto cfg = make_cfg({0.8}, {}, 30);
    FieldStatistics fs("dye", {0, 3}, 1, cfg);
    stats::QuantileEstimator reference(0.8, *cfg, 0.42);

    CounterRng rng(77, 0);
    std::vector<double> chunk(3);
    chunk = {0.42, 0.1, 0.9};
    fs.ingest_chunk(0, 0, chunk);
    for (int k = 1; k < 30; ++k) {
        for (std::size_t i = 0; i < 3; ++i) chunk[i] = rng.uniform(k * 3 + i);
        reference.update(chunk[0]);
        fs.ingest_chunk(0, 0, chunk);
    }
    CHECK(fs.quantile_at(0, 0, 0.8) == reference.quantile());
}
