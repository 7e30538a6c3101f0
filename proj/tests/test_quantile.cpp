#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "instat/normal.hpp"
#include "instat/rng.hpp"
#include "instat/stats/quantile.hpp"
#include "oracle.hpp"

using namespace instat;
using stats::GammaSchedule;
using stats::QuantileEstimator;
using stats::StatisticsConfig;

namespace {

StatisticsConfig cfg_linear(std::uint64_t declared_n) {
    StatisticsConfig cfg;
    cfg.declared_n = declared_n;
    return cfg;
}

} // namespace

TEST_CASE("inverse normal CDF: reference values and erf round-trip") {
    CHECK(inverse_normal_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(inverse_normal_cdf(0.95) == doctest::Approx(1.6448536269514722).epsilon(1e-12));
    CHECK(inverse_normal_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK(inverse_normal_cdf(0.05) == doctest::Approx(-1.6448536269514722).epsilon(1e-12));
    for (double p = 0.001; p < 0.9995; p += 0.0103) {
        const double q = inverse_normal_cdf(p);
        const double back = 0.5 * (1.0 + std::erf(q / std::sqrt(2.0)));
        CHECK(std::fabs(back - p) < 1e-12);
    }
}

TEST_CASE("gamma_linear: boundary values are exact") {
    CHECK(stats::gamma_linear(1, 1000) == 0.1);
    CHECK(stats::gamma_linear(1000, 1000) == 1.0);
    CHECK(stats::gamma_linear(1500, 1000) == 1.0); // clamped past declared N
    CHECK(stats::gamma_linear(1, 2) == 0.1);
    CHECK(stats::gamma_linear(2, 2) == 1.0);
    CHECK_THROWS_AS(stats::gamma_linear(1, 1), ConfigError);
}

TEST_CASE("rm update: single-step hand substitutions") {
    const auto cfg = cfg_linear(1000);
    SUBCASE("observation above the estimate moves it up by alpha") {
        QuantileEstimator est(0.95, cfg, 0.0);
        est.update(1.0); // step C/1^0.1 = 1, indicator 0
        CHECK(est.quantile() == doctest::Approx(0.95).epsilon(1e-15));
        CHECK(est.observations() == 2);
    }
    SUBCASE("observation below moves it down by 1-alpha") {
        QuantileEstimator est(0.95, cfg, 0.0);
        est.update(-1.0);
        CHECK(est.quantile() == doctest::Approx(-0.05).epsilon(1e-12));
    }
    SUBCASE("tie counts as below-or-equal") {
        QuantileEstimator est(0.5, cfg, 1.0);
        est.update(1.0);
        CHECK(est.quantile() < 1.0);
    }
}

TEST_CASE("init_quantile seeds with the first observation") {
    const auto cfg = cfg_linear(100);
    const auto est = stats::init_quantile(0.95, cfg, 3.7);
    CHECK(est.quantile() == 3.7);
    CHECK(est.observations() == 1);
    const auto est2 = stats::init_quantile(0.5, cfg, 0.0);
    CHECK(est2.quantile() == 0.0);
    CHECK_THROWS_AS(stats::init_quantile(0.95, cfg, std::nan("")), DataQualityError);
}

TEST_CASE("rm trajectory equals a direct transcription of the recursion") {
    const std::uint64_t capital_n = 500;
    const auto cfg = cfg_linear(capital_n);
    CounterRng rng(7, 3);
    const double alpha = 0.8;

    QuantileEstimator est(alpha, cfg, rng.uniform(0));
    double q = rng.uniform(0);
    for (std::uint64_t n = 1; n < capital_n; ++n) {
        const double y = 2.0 * rng.uniform(n) - 0.5;
        est.update(y);
        const double gamma = 0.1 + 0.9 * (static_cast<double>(n - 1) /
                                          static_cast<double>(capital_n - 1));
        const double ind = (y <= q) ? 1.0 : 0.0;
        q = q - (1.0 / std::pow(static_cast<double>(n), gamma)) * (ind - alpha);
        CHECK(est.quantile() == doctest::Approx(q).epsilon(1e-14));
    }
}

TEST_CASE("rm update direction property and step magnitude bound") {
    const auto cfg = cfg_linear(200);
    CounterRng rng(11, 0);
    QuantileEstimator est(0.3, cfg, 0.2);
    for (std::uint64_t i = 0; i < 1000; ++i) {
        const double before = est.quantile();
        const std::uint64_t n = est.observations();
        const double y = 3.0 * rng.uniform(i) - 1.5;
        est.update(y);
        const double gamma = stats::gamma_linear(n, 200);
        const double step = std::pow(static_cast<double>(n), -gamma);
        CHECK(std::fabs(est.quantile() - before) <= step + 1e-15);
        if (y > before) {
            CHECK(est.quantile() > before);
        } else {
            CHECK(est.quantile() < before);
        }
    }
}

TEST_CASE("linear-profile step sizes decay monotonically for C=1") {
    for (const std::uint64_t declared : {200ull, 1000ull, 3000ull}) {
        stats::StepTable table(1.0, GammaSchedule::linear(), declared);
        double prev = table.step(2);
        for (std::uint64_t n = 3; n <= declared + 50; ++n) {
            const double s = table.step(n);
            CHECK(s <= prev + 1e-18);
            prev = s;
        }
    }
}

TEST_CASE("step table matches direct evaluation and clamps past declared N") {
    stats::StepTable table(2.5, GammaSchedule::linear(), 100);
    for (std::uint64_t n = 1; n <= 100; ++n) {
        const double expect =
            2.5 / std::pow(static_cast<double>(n), stats::gamma_linear(n, 100));
        CHECK(table.step(n) == expect);
    }
    CHECK(table.step(150) == 2.5 / 150.0);
    stats::StepTable constant(1.0, GammaSchedule::constant(0.7), 100);
    CHECK(constant.step(250) == doctest::Approx(std::pow(250.0, -0.7)));
}

TEST_CASE("rm estimator converges to the Gaussian 0.95 quantile") {
    // 200 seeded repetitions of N=1000; at least 95% must land within 0.25
    // of the exact quantile.
    const double exact = inverse_normal_cdf(0.95);
    const auto cfg = cfg_linear(1000);
    int within = 0;
    const int reps = 200;
    for (int rep = 0; rep < reps; ++rep) {
        CounterRng rng(4242, static_cast<std::uint64_t>(rep));
        QuantileEstimator est(0.95, cfg, inverse_normal_cdf(rng.uniform(0)));
        for (std::uint64_t n = 1; n < 1000; ++n)
            est.update(inverse_normal_cdf(rng.uniform(n)));
        if (std::fabs(est.quantile() - exact) <= 0.25) ++within;
    }
    CHECK(within >= 190);
}

TEST_CASE("rm order sensitivity: permutations differ but stay near the oracle") {
    const std::uint64_t n = 1000;
    CounterRng rng(2718, 0);
    std::vector<double> xs(n);
    for (std::uint64_t i = 0; i < n; ++i) xs[i] = inverse_normal_cdf(rng.uniform(i));
    std::vector<double> reversed(xs.rbegin(), xs.rend());

    const auto cfg = cfg_linear(n);
    const auto run = [&](const std::vector<double>& seq) {
        QuantileEstimator est(0.95, cfg, seq[0]);
        for (std::uint64_t i = 1; i < n; ++i) est.update(seq[i]);
        return est.quantile();
    };
    const double q_fwd = run(xs);
    const double q_rev = run(reversed);
    const double exact = inverse_normal_cdf(0.95);
    CHECK(q_fwd != q_rev); // different orders, different paths
    CHECK(std::fabs(q_fwd - exact) <= 0.25);
    CHECK(std::fabs(q_rev - exact) <= 0.25);
}

TEST_CASE("empirical quantile: rank formula") {
    SUBCASE("hand-sorted cases") {
        const double xs[] = {3.0, 1.0, 2.0};
        CHECK(stats::empirical_quantile(xs, 0.5) == 2.0);
        std::vector<double> ten;
        for (int i = 1; i <= 10; ++i) ten.push_back(i);
        CHECK(stats::empirical_quantile(ten, 0.95) == 10.0);
        CHECK(stats::empirical_quantile(ten, 0.05) == 1.0);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(stats::empirical_quantile(std::vector<double>{}, 0.5), StatError);
        const double bad[] = {1.0, NAN};
        CHECK_THROWS_AS(stats::empirical_quantile(bad, 0.5), DataQualityError);
    }
    SUBCASE("always returns a sample member") {
        CounterRng rng(1, 9);
        for (int trial = 0; trial < 50; ++trial) {
            const std::size_t n = 1 + rng.below(1000 + trial, 40);
            std::vector<double> xs(n);
            for (std::size_t i = 0; i < n; ++i)
                xs[i] = std::round(10.0 * rng.uniform(trial * 100 + i)) / 10.0;
            const double alpha = 0.01 + 0.98 * rng.uniform(50000 + trial);
            const double q = stats::empirical_quantile(xs, alpha);
            CHECK(std::count(xs.begin(), xs.end(), q) > 0);
        }
    }
    SUBCASE("matches the sort-based oracle") {
        CounterRng rng(17, 17);
        std::vector<double> xs(257);
        for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = rng.uniform(i);
        for (double alpha : {0.01, 0.25, 0.5, 0.9, 0.99}) {
            CHECK(stats::empirical_quantile(xs, alpha) == oracle::batch_quantile(xs, alpha));
        }
    }
}

TEST_CASE("empirical quantile sampling spread matches the asymptotic variance") {
    // 200 repetitions at N=1000, alpha=0.95 against a standard Gaussian:
    // the spread should match alpha(1-alpha)/[(N+2) f(q)^2] within 25%.
    const double alpha = 0.95;
    const std::uint64_t n = 1000;
    const double q = inverse_normal_cdf(alpha);
    const double f = normal_pdf(q);
    const double asymptotic_std = std::sqrt(alpha * (1 - alpha) / ((n + 2) * f * f));

    std::vector<double> estimates;
    std::vector<double> xs(n);
    for (int rep = 0; rep < 200; ++rep) {
        CounterRng rng(515151, static_cast<std::uint64_t>(rep));
        for (std::uint64_t i = 0; i < n; ++i) xs[i] = inverse_normal_cdf(rng.uniform(i));
        estimates.push_back(stats::empirical_quantile(xs, alpha));
    }
    const auto batch = oracle::batch_moments(estimates);
    const double sample_std = std::sqrt(batch.variance());
    CHECK(sample_std == doctest::Approx(asymptotic_std).epsilon(0.25));
    CHECK(batch.mean == doctest::Approx(q).epsilon(0.02));
}
