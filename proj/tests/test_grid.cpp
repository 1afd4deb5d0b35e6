#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "lmkan/grid.hpp"
#include "lmkan/rng.hpp"

using namespace lmkan;

namespace {

// Binary-search reference for the interval index: number of interior points
// (points[1..G-1]) that are <= x.
int interval_index_bsearch(const SigmaGrid& g, double x) {
    const auto begin = g.points.begin() + 1;
    const auto end = g.points.begin() + g.G;
    return static_cast<int>(std::upper_bound(begin, end, x) - begin);
}

// 99.9% chi-square quantiles, frozen from scipy.stats.chi2.ppf(0.999, dof).
double chi2_q999(int dof) {
    switch (dof) {
        case 3: return 16.26623619623813;
        case 11: return 31.264133620239985;
        case 39: return 72.0546629519878;
        default: FAIL("no frozen quantile for dof " << dof); return 0;
    }
}

}  // namespace

TEST_CASE("sigma matches the single-exponential definition") {
    CHECK(sigma(0.0) == 0.5);
    CHECK(sigma(-std::log(2.0)) == Catch::Approx(0.25).epsilon(1e-15));
    // reference value of 1 - 0.5 e^{-0.1}
    CHECK(sigma(0.1) == Catch::Approx(0.5475812909820202).epsilon(1e-15));
    CHECK(std::isnan(sigma(std::nan(""))));

    // monotone increasing on a coarse sweep
    double prev = sigma(-30.0);
    for (double x = -29.5; x < 30.0; x += 0.5) {
        const double s = sigma(x);
        CHECK(s > prev);
        prev = s;
    }
}

TEST_CASE("sigma_inv inverts sigma") {
    CHECK(sigma_inv(0.5) == 0.0);
    CHECK(sigma_inv(0.25) == Catch::Approx(-std::log(2.0)).epsilon(1e-15));
    CHECK(sigma_inv(sigma(1.7)) == Catch::Approx(1.7).epsilon(1e-14));
    CHECK_THROWS_AS(sigma_inv(0.0), std::domain_error);
    CHECK_THROWS_AS(sigma_inv(1.0), std::domain_error);
    CHECK_THROWS_AS(sigma_inv(-0.2), std::domain_error);

    RandomStream rs(11, "sigma_inv.roundtrip");
    for (int i = 0; i < 1000; ++i) {
        const double p = rs.uniform_open();
        CHECK(sigma(sigma_inv(p)) == Catch::Approx(p).epsilon(1e-14));
    }
}

TEST_CASE("build_grid constructs the analytic percentile points") {
    const SigmaGrid g4 = build_grid(4);
    const double ln2 = std::log(2.0);
    REQUIRE(g4.points.size() == 5);
    CHECK(g4.points[0] == Catch::Approx(-2 * ln2).epsilon(1e-15));
    CHECK(g4.points[1] == Catch::Approx(-ln2).epsilon(1e-15));
    CHECK(g4.points[2] == 0.0);
    CHECK(g4.points[3] == Catch::Approx(ln2).epsilon(1e-15));
    CHECK(g4.points[4] == Catch::Approx(2 * ln2).epsilon(1e-15));
    CHECK(g4.inv_area(1, 1) == Catch::Approx(1.0 / (ln2 * ln2)).epsilon(1e-14));

    const SigmaGrid g3 = build_grid(3);
    REQUIRE(g3.points.size() == 4);
    CHECK(g3.points[1] == Catch::Approx(sigma_inv(1.0 / 3.0)).epsilon(1e-15));
    CHECK(g3.points[2] == Catch::Approx(sigma_inv(2.0 / 3.0)).epsilon(1e-15));
    CHECK(g3.points[0] == 2 * g3.points[1] - g3.points[2]);
    CHECK(g3.points[3] == 2 * g3.points[2] - g3.points[1]);

    CHECK_THROWS_AS(build_grid(2), std::invalid_argument);
    CHECK_THROWS_AS(build_grid(0), std::invalid_argument);
}

TEST_CASE("grid invariants hold for a range of G") {
    for (int G : {3, 4, 5, 12, 13, 40}) {
        const SigmaGrid g = build_grid(G);
        REQUIRE(g.points.size() == static_cast<std::size_t>(G + 1));
        for (int k = 0; k < G; ++k) CHECK(g.points[k] < g.points[k + 1]);
        // exact mirror symmetry by construction
        for (int k = 0; k <= G; ++k) CHECK(g.points[k] == -g.points[G - k]);
        if (G % 2 == 0) CHECK(g.points[G / 2] == 0.0);
        CHECK(g.points[0] == 2 * g.points[1] - g.points[2]);
        CHECK(g.points[G] == 2 * g.points[G - 1] - g.points[G - 2]);
        for (double a : g.inv_areas) {
            CHECK(std::isfinite(a));
            CHECK(a > 0.0);
        }
        // the spacing of the two leftmost real points is ln(2k/G) steps:
        // exactly ln 2 whenever both percentiles sit below one half (G >= 4)
        if (G >= 4)
            CHECK(g.points[2] - g.points[1] == Catch::Approx(std::log(2.0)).epsilon(1e-14));
    }
}

TEST_CASE("interval_index follows the floor rule with clamped tails") {
    const SigmaGrid g = build_grid(4);
    CHECK(interval_index(g, 0.1) == 2);  // sigma(0.1)*4 = 2.19
    CHECK(interval_index(g, -100.0) == 0);
    CHECK(interval_index(g, 100.0) == 3);
    CHECK(interval_index(g, 1e308) == 3);
}

TEST_CASE("interval_index agrees with binary search on random inputs") {
    RandomStream rs(42, "grid.bsearch");
    for (int G : {3, 4, 12, 40}) {
        const SigmaGrid g = build_grid(G);
        for (int i = 0; i < 250000; ++i) {
            // mix of normal and heavy-tailed draws
            const double x = i % 2 == 0 ? rs.normal()
                                        : std::tan(M_PI * (rs.uniform_open() - 0.5));
            const int fast = interval_index(g, x);
            const int slow = interval_index_bsearch(g, x);
            if (fast != slow) {
                CAPTURE(G, x);
                REQUIRE(fast == slow);
            }
        }
    }
}

TEST_CASE("interval_index is antisymmetric about the origin") {
    RandomStream rs(43, "grid.symmetry");
    for (int G : {4, 13}) {
        const SigmaGrid g = build_grid(G);
        for (int i = 0; i < 100000; ++i) {
            const double x = 3.0 * rs.normal();
            if (x == 0.0) continue;
            CHECK(interval_index(g, -x) == G - 1 - interval_index(g, x));
        }
    }
}

TEST_CASE("percentile sampling fills intervals uniformly") {
    // x = sigma_inv(u) with u uniform lands in interval floor(u*G); the
    // occupancy chi-square should sit below the 99.9% quantile.
    for (int G : {4, 12, 40}) {
        const SigmaGrid g = build_grid(G);
        RandomStream rs(1000 + G, "grid.percentile");
        const int n = 1000000;
        std::vector<long> counts(G, 0);
        for (int i = 0; i < n; ++i) counts[interval_index(g, sigma_inv(rs.uniform_open()))]++;
        const double expected = static_cast<double>(n) / G;
        double chi2 = 0.0;
        for (long c : counts) {
            const double d = static_cast<double>(c) - expected;
            chi2 += d * d / expected;
        }
        CAPTURE(G, chi2);
        CHECK(chi2 < chi2_q999(G - 1));
    }
}

TEST_CASE("preamble weights at nodes, midpoints, and ghost extrapolation") {
    const SigmaGrid g = build_grid(4);

    SECTION("grid node gives a one-hot weight") {
        const Preamble p = preamble(g, g.points[1], g.points[1]);
        CHECK(p.i1 == 1);
        CHECK(p.i2 == 1);
        CHECK(p.w00 == Catch::Approx(1.0).margin(1e-14));
        CHECK(p.w10 == Catch::Approx(0.0).margin(1e-14));
        CHECK(p.w01 == Catch::Approx(0.0).margin(1e-14));
        CHECK(p.w11 == Catch::Approx(0.0).margin(1e-14));
    }

    SECTION("cell midpoints give four quarters") {
        const double m1 = 0.5 * (g.points[1] + g.points[2]);
        const double m2 = 0.5 * (g.points[2] + g.points[3]);
        const Preamble p = preamble(g, m1, m2);
        CHECK(p.i1 == 1);
        CHECK(p.i2 == 2);
        for (double w : {p.w00, p.w10, p.w01, p.w11}) CHECK(w == Catch::Approx(0.25).margin(1e-14));
    }

    SECTION("left tail extrapolates through the ghost point") {
        const Preamble p = preamble(g, -10.0, 0.0);
        CHECK(p.i1 == 0);
        CHECK(p.w10 < 0.0);
        CHECK(p.w00 > 1.0);
        CHECK(p.w00 + p.w10 + p.w01 + p.w11 == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("partition of unity over normal and Cauchy samples") {
    RandomStream rs(7, "grid.pou");
    for (int G : {3, 4, 12, 40}) {
        const SigmaGrid g = build_grid(G);
        for (int i = 0; i < 25000; ++i) {
            const bool heavy = i % 2 == 1;
            const double x1 = heavy ? std::tan(M_PI * (rs.uniform_open() - 0.5)) : rs.normal();
            const double x2 = heavy ? std::tan(M_PI * (rs.uniform_open() - 0.5)) : rs.normal();
            const Preamble p = preamble(g, x1, x2);
            const double sum = p.w00 + p.w10 + p.w01 + p.w11;
            if (heavy) {
                // Far in the tails the individual weights grow like (x/h)^2,
                // so the achievable absolute deviation is scale * eps; test
                // the deviation relative to the weight magnitude there.
                const double scale = std::abs(p.w00) + std::abs(p.w10) + std::abs(p.w01) +
                                     std::abs(p.w11);
                CHECK(std::abs(sum - 1.0) <= 1e-12 * std::max(1.0, scale));
            } else {
                CHECK(std::abs(sum - 1.0) <= 1e-12);
            }
        }
    }
}
