#include <catch_amalgamated.hpp>

#include <cmath>

#include "lmkan/hessian.hpp"
#include "lmkan/rng.hpp"

using namespace lmkan;

namespace {

Func2D sheet_from(const SigmaGrid& g, double (*fn)(double, double)) {
    Func2D f(g.G);
    for (int i = 0; i <= g.G; ++i)
        for (int j = 0; j <= g.G; ++j) f.at(i, j) = fn(g.points[i], g.points[j]);
    return f;
}

Func2D random_sheet(const SigmaGrid& g, RandomStream& rs) {
    Func2D f(g.G);
    for (double& c : f.coeffs) c = rs.normal();
    return f;
}

}  // namespace

TEST_CASE("penalty vanishes exactly on linear sheets") {
    for (int G : {3, 4, 12}) {
        const SigmaGrid g = build_grid(G);
        const Func2D f = sheet_from(g, [](double x, double y) { return 2.0 * x - 3.0 * y + 1.0; });
        CHECK(hessian_penalty(g, f) <= 1e-20);
        const Func2D grad = hessian_penalty_grad(g, f);
        for (double v : grad.coeffs) CHECK(std::abs(v) <= 1e-12);
    }
}

TEST_CASE("non-uniform stencils are exact on quadratics") {
    SECTION("pure x^2 gives mean H = 4") {
        for (int G : {3, 4, 12}) {
            const SigmaGrid g = build_grid(G);
            const Func2D f = sheet_from(g, [](double x, double) { return x * x; });
            CHECK(hessian_penalty(g, f) == Catch::Approx(4.0).margin(1e-10));
        }
    }
    SECTION("pure xy gives mean H = 2") {
        for (int G : {3, 4, 12}) {
            const SigmaGrid g = build_grid(G);
            const Func2D f = sheet_from(g, [](double x, double y) { return x * y; });
            CHECK(hessian_penalty(g, f) == Catch::Approx(2.0).margin(1e-10));
        }
    }
    SECTION("general quadratic gives 4a^2 + 2b^2 + 4c^2") {
        RandomStream rs(99, "hessian.quadratic");
        for (int G : {3, 4, 12}) {
            const SigmaGrid g = build_grid(G);
            for (int trial = 0; trial < 25; ++trial) {
                const double a = rs.normal(), b = rs.normal(), c = rs.normal();
                const double d = rs.normal(), e = rs.normal(), k = rs.normal();
                Func2D f(g.G);
                for (int i = 0; i <= g.G; ++i)
                    for (int j = 0; j <= g.G; ++j) {
                        const double x = g.points[i], y = g.points[j];
                        f.at(i, j) = a * x * x + b * x * y + c * y * y + d * x + e * y + k;
                    }
                const double want = 4 * a * a + 2 * b * b + 4 * c * c;
                CHECK(hessian_penalty(g, f) == Catch::Approx(want).margin(1e-10 * (1 + want)));
            }
        }
    }
}

TEST_CASE("penalty is nonnegative and zero only for planes") {
    RandomStream rs(7, "hessian.nonneg");
    for (int trial = 0; trial < 50; ++trial) {
        const SigmaGrid g = build_grid(trial % 2 ? 4 : 7);
        const Func2D f = random_sheet(g, rs);
        const double h = hessian_penalty(g, f);
        CHECK(h >= 0.0);
        if (h == 0.0) CHECK(plane_fit_relative_residual(g, f) <= 1e-10);
    }
    // and a genuine plane has zero residual under the fit as well
    const SigmaGrid g = build_grid(6);
    const Func2D lin = sheet_from(g, [](double x, double y) { return 0.3 * x - 0.9 * y + 2.0; });
    CHECK(plane_fit_relative_residual(g, lin) <= 1e-12);
}

TEST_CASE("penalty gradient matches finite differences") {
    RandomStream rs(13, "hessian.grad");
    const double step = 1e-6;
    for (int G : {3, 4, 12}) {
        const SigmaGrid g = build_grid(G);
        for (int trial = 0; trial < 4; ++trial) {
            Func2D f = random_sheet(g, rs);
            const Func2D grad = hessian_penalty_grad(g, f);
            for (int i = 0; i <= G; ++i)
                for (int j = 0; j <= G; ++j) {
                    const double keep = f.at(i, j);
                    f.at(i, j) = keep + step;
                    const double hi = hessian_penalty(g, f);
                    f.at(i, j) = keep - step;
                    const double lo = hessian_penalty(g, f);
                    f.at(i, j) = keep;
                    const double fd = (hi - lo) / (2 * step);
                    CHECK(std::abs(grad.at(i, j) - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
                }
        }
    }
}

TEST_CASE("penalty is quadratic: scaling coefficients scales the gradient") {
    const SigmaGrid g = build_grid(5);
    RandomStream rs(21, "hessian.scale");
    Func2D f = random_sheet(g, rs);
    Func2D f3 = f;
    for (double& c : f3.coeffs) c *= 3.0;
    CHECK(hessian_penalty(g, f3) == Catch::Approx(9.0 * hessian_penalty(g, f)).epsilon(1e-12));
    const Func2D g1 = hessian_penalty_grad(g, f);
    const Func2D g3 = hessian_penalty_grad(g, f3);
    for (std::size_t i = 0; i < g1.coeffs.size(); ++i)
        CHECK(g3.coeffs[i] == Catch::Approx(3.0 * g1.coeffs[i]).epsilon(1e-12).margin(1e-15));
}

TEST_CASE("sheet shape mismatches are rejected") {
    const SigmaGrid g = build_grid(4);
    Func2D wrong(5);
    CHECK_THROWS_AS(hessian_penalty(g, wrong), std::invalid_argument);
    CHECK_THROWS_AS(hessian_penalty_grad(g, wrong), std::invalid_argument);
}
