#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "instat/normal.hpp"
#include "instat/rng.hpp"
#include "instat/stats/moments.hpp"
#include "oracle.hpp"

using instat::CounterRng;
using instat::stats::MomentsAccumulator;

namespace {

MomentsAccumulator accumulate(std::span<const double> xs,
                              std::vector<double> thresholds = {}) {
    MomentsAccumulator acc(std::move(thresholds));
    for (double x : xs) acc.update(x);
    return acc;
}

} // namespace

TEST_CASE("moments: small hand-checked streams") {
    SUBCASE("symmetric three-point sample") {
        const double xs[] = {1.0, 2.0, 3.0};
        auto acc = accumulate(xs);
        CHECK(acc.count() == 3);
        CHECK(acc.mean() == doctest::Approx(2.0));
        CHECK(acc.variance() == doctest::Approx(1.0));
        CHECK(acc.min() == 1.0);
        CHECK(acc.max() == 3.0);
    }
    SUBCASE("single sample") {
        const double xs[] = {5.0};
        auto acc = accumulate(xs);
        CHECK(acc.count() == 1);
        CHECK(acc.mean() == 5.0);
        CHECK(acc.min() == 5.0);
        CHECK(acc.max() == 5.0);
        CHECK(acc.m2() == 0.0);
    }
}

TEST_CASE("moments: empty accumulator queries error") {
    MomentsAccumulator acc;
    CHECK_THROWS_AS(acc.mean(), instat::StatError);
    CHECK_THROWS_AS(acc.min(), instat::StatError);
    CHECK_THROWS_AS(acc.variance(), instat::StatError);
}

TEST_CASE("moments: non-finite input is a hard error and leaves state intact") {
    MomentsAccumulator acc;
    acc.update(1.0);
    CHECK_THROWS_AS(acc.update(std::nan("")), instat::DataQualityError);
    CHECK_THROWS_AS(acc.update(INFINITY), instat::DataQualityError);
    CHECK(acc.count() == 1);
    try {
        acc.update(-INFINITY);
    } catch (const instat::DataQualityError& e) {
        CHECK(std::isinf(e.value()));
    }
}

TEST_CASE("moments: 1e5-sample stream matches the two-pass batch oracle") {
    const std::size_t n = 100000;
    CounterRng rng(2024, 7);
    std::vector<double> xs(n);
    for (std::size_t i = 0; i < n; ++i) {
        // Mildly skewed mixture to give all four moments something to do.
        const double u = rng.uniform(i);
        xs[i] = (i % 3 == 0) ? 4.0 * u * u : -1.5 + u;
    }
    auto acc = accumulate(xs);
    const auto batch = oracle::batch_moments(xs);
    CHECK(oracle::rel_err(acc.mean(), batch.mean) <= 1e-10);
    CHECK(oracle::rel_err(acc.variance(), batch.variance()) <= 1e-10);
    CHECK(oracle::rel_err(acc.skewness(), batch.skewness()) <= 1e-10);
    CHECK(oracle::rel_err(acc.kurtosis(), batch.kurtosis()) <= 1e-10);
    CHECK(acc.min() == batch.min);
    CHECK(acc.max() == batch.max);
}

TEST_CASE("moments: permutation of the stream leaves derived stats equal to 1e-9") {
    const std::size_t n = 5000;
    CounterRng rng(99, 1);
    std::vector<double> xs(n);
    for (std::size_t i = 0; i < n; ++i) xs[i] = instat::inverse_normal_cdf(rng.uniform(i));

    auto forward = accumulate(xs);
    std::vector<double> shuffled = xs;
    for (std::size_t i = n - 1; i > 0; --i)
        std::swap(shuffled[i], shuffled[rng.below(1000000 + i, i + 1)]);
    auto permuted = accumulate(shuffled);

    CHECK(oracle::rel_err(permuted.mean(), forward.mean()) <= 1e-9);
    CHECK(oracle::rel_err(permuted.variance(), forward.variance()) <= 1e-9);
    CHECK(oracle::rel_err(permuted.skewness(), forward.skewness()) <= 1e-9);
    CHECK(oracle::rel_err(permuted.kurtosis(), forward.kurtosis()) <= 1e-9);
    CHECK(permuted.min() == forward.min());
    CHECK(permuted.max() == forward.max());
}

TEST_CASE("moments: merge equals sequential accumulation") {
    SUBCASE("tiny case") {
        const double a_vals[] = {1.0, 2.0};
        const double b_vals[] = {3.0};
        const double all_vals[] = {1.0, 2.0, 3.0};
        auto a = accumulate(a_vals);
        a.merge(accumulate(b_vals));
        const auto whole = accumulate(all_vals);
        CHECK(oracle::rel_err(a.mean(), whole.mean()) <= 1e-12);
        CHECK(oracle::rel_err(a.variance(), whole.variance()) <= 1e-12);
        CHECK(a.count() == 3);
    }
    SUBCASE("merge with empty is the identity") {
        const double vals[] = {0.5, -2.0, 7.0};
        auto acc = accumulate(vals);
        const auto before = acc;
        acc.merge(MomentsAccumulator{});
        CHECK(acc == before);
        MomentsAccumulator empty;
        empty.merge(before);
        CHECK(empty == before);
    }
    SUBCASE("associativity over three random blocks") {
        CounterRng rng(5, 5);
        std::vector<std::vector<double>> blocks(3, std::vector<double>(100));
        std::uint64_t c = 0;
        for (auto& b : blocks)
            for (auto& x : b) x = 10.0 * rng.uniform(c++) - 3.0;

        auto ab = accumulate(blocks[0]);
        ab.merge(accumulate(blocks[1]));
        auto ab_c = ab;
        ab_c.merge(accumulate(blocks[2]));

        auto bc = accumulate(blocks[1]);
        bc.merge(accumulate(blocks[2]));
        auto a_bc = accumulate(blocks[0]);
        a_bc.merge(bc);

        CHECK(oracle::rel_err(ab_c.mean(), a_bc.mean()) <= 1e-10);
        CHECK(oracle::rel_err(ab_c.variance(), a_bc.variance()) <= 1e-10);
        CHECK(oracle::rel_err(ab_c.skewness(), a_bc.skewness()) <= 1e-10);
        CHECK(oracle::rel_err(ab_c.kurtosis(), a_bc.kurtosis()) <= 1e-10);
    }
    SUBCASE("mismatched threshold lists refuse to merge") {
        MomentsAccumulator a({1.0});
        MomentsAccumulator b({2.0});
        a.update(0.0);
        b.update(0.0);
        CHECK_THROWS_AS(a.merge(b), instat::StatError);
    }
}

TEST_CASE("moments: exceedance probabilities") {
    SUBCASE("hand count") {
        MomentsAccumulator acc({2.5});
        for (double x : {1.0, 2.0, 3.0, 4.0}) acc.update(x);
        CHECK(acc.exceedance_probability(2.5) == doctest::Approx(0.5));
    }
    SUBCASE("all below the threshold") {
        MomentsAccumulator acc({10.0});
        for (double x : {1.0, 2.0, 3.0}) acc.update(x);
        CHECK(acc.exceedance_probability(10.0) == 0.0);
    }
    SUBCASE("unknown threshold errors") {
        MomentsAccumulator acc({1.0});
        acc.update(0.0);
        CHECK_THROWS_AS(acc.exceedance_probability(2.0), instat::StatError);
    }
    SUBCASE("uniform draws against the binomial bound") {
        MomentsAccumulator acc({0.9});
        CounterRng rng(31337, 0);
        for (std::size_t i = 0; i < 10000; ++i) acc.update(rng.uniform(i));
        CHECK(acc.exceedance_probability(0.9) == doctest::Approx(0.1).epsilon(0.1));
        CHECK(std::fabs(acc.exceedance_probability(0.9) - 0.1) <= 0.01);
    }
}
