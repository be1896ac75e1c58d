#include <catch2/catch_amalgamated.hpp>

#include <msinfer/msr.hpp>

#include "oracles.hpp"

#include <cmath>

using namespace msinfer;
using Catch::Approx;

namespace {

Vector vec1(double a) {
    Vector v(1);
    v << a;
    return v;
}

Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

Sample hyperplane_sample(int n, std::uint64_t seed) {
    Rng rng(seed);
    Matrix x(n, 2);
    Vector y(n);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = 2.0 * rng.uniform01() - 1.0;
        x(i, 1) = 2.0 * rng.uniform01() - 1.0;
        y(i) = 2.0 + 3.0 * x(i, 0) - x(i, 1);
    }
    return Sample(std::move(x), std::move(y));
}

Sample vshape_sample(int n, double noise, std::uint64_t seed) {
    Rng rng(seed);
    Matrix x(n, 1);
    Vector y(n);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = 2.0 * rng.uniform01() - 1.0;
        y(i) = std::abs(x(i, 0)) + noise * rng.normal();
    }
    return Sample(std::move(x), std::move(y));
}

} // namespace

TEST_CASE("exact hyperplane data is recovered exactly", "[msr]") {
    const Sample s = hyperplane_sample(120, 501);
    const MsrModel model = fit_msr(s, silverman_bandwidth(s));
    REQUIRE(model.n_cells() >= 1);
    for (const auto& cell : model.cells) {
        if (cell.fallback) continue;
        CHECK(cell.intercept == Approx(2.0).margin(1e-8));
        CHECK(cell.slope(0) == Approx(3.0).margin(1e-8));
        CHECK(cell.slope(1) == Approx(-1.0).margin(1e-8));
    }
    // prediction reproduces the plane anywhere inside the box
    Rng rng(502);
    for (int t = 0; t < 25; ++t) {
        const Vector x = vec2(1.6 * rng.uniform01() - 0.8, 1.6 * rng.uniform01() - 0.8);
        CHECK(model.predict(x) == Approx(2.0 + 3.0 * x(0) - x(1)).margin(1e-8));
    }
    // a training point in a well-populated cell predicts its own response
    const Vector x0 = s.points.row(3).transpose();
    CHECK(model.predict(x0) == Approx((*s.response)(3)).margin(1e-8));
}

TEST_CASE("V-shaped data yields two cells with opposite slopes", "[msr]") {
    const Sample s = vshape_sample(500, 0.05, 503);
    const MsrModel model = fit_msr(s, silverman_bandwidth(s));

    // the two populated cells carry slopes near -1 and +1
    double slope_neg = 0.0, slope_pos = 0.0;
    Index n_neg = 0, n_pos = 0;
    for (const auto& cell : model.cells) {
        if (cell.fallback || cell.n_points < 50) continue;
        if (cell.slope(0) < 0) {
            slope_neg = cell.slope(0);
            n_neg = cell.n_points;
        } else {
            slope_pos = cell.slope(0);
            n_pos = cell.n_points;
        }
    }
    REQUIRE(n_neg > 100);
    REQUIRE(n_pos > 100);
    CHECK(slope_neg == Approx(-1.0).margin(0.1));
    CHECK(slope_pos == Approx(1.0).margin(0.1));

    CHECK(std::abs(model.predict(vec1(0.5)) - 0.5) < 0.15);
    CHECK(std::abs(model.predict(vec1(-0.5)) - 0.5) < 0.15);
}

TEST_CASE("per-cell coefficients equal the normal-equations oracle", "[msr]") {
    Rng rng(504);
    for (int t = 0; t < 20; ++t) {
        const int n = 30 + static_cast<int>(rng.uniform_index(40));
        Matrix x(n, 2);
        Vector y(n);
        for (int i = 0; i < n; ++i) {
            x(i, 0) = rng.normal();
            x(i, 1) = rng.normal();
            y(i) = std::sin(x(i, 0)) + 0.3 * x(i, 1) + 0.1 * rng.normal();
        }
        const Sample s{Matrix(x), Vector(y)};
        const MsrModel model = fit_msr(s, 0.8);

        for (int c = 0; c < model.n_cells(); ++c) {
            const auto& cell = model.cells[c];
            if (cell.fallback || cell.ridged) continue;
            std::vector<int> rows;
            for (int i = 0; i < n; ++i) {
                if (model.point_cells[i] == c) rows.push_back(i);
            }
            REQUIRE(static_cast<Index>(rows.size()) == cell.n_points);
            Matrix cx(rows.size(), 2);
            Vector cy(rows.size());
            for (std::size_t r = 0; r < rows.size(); ++r) {
                cx.row(r) = x.row(rows[r]);
                cy(r) = y(rows[r]);
            }
            const Vector oracle = oracle::ols_normal_equations(cx, cy);
            CHECK(std::abs(cell.intercept - oracle(0)) < 1e-10);
            CHECK((cell.slope - oracle.tail(2)).norm() < 1e-10);
        }
    }
}

TEST_CASE("prediction is exactly piecewise linear", "[msr]") {
    const Sample s = vshape_sample(300, 0.05, 505);
    const MsrModel model = fit_msr(s, silverman_bandwidth(s));
    Rng rng(506);
    for (int t = 0; t < 50; ++t) {
        const Vector a = vec1(1.8 * rng.uniform01() - 0.9);
        const Vector b = vec1(1.8 * rng.uniform01() - 0.9);
        if (model.cell_for(a) != model.cell_for(b)) continue;
        const int c = model.cell_for(a);
        if (c < 0) continue;
        const double diff = model.predict(a) - model.predict(b);
        CHECK(diff == Approx(model.cells[c].slope.dot(a - b)).margin(1e-12));
    }
}

TEST_CASE("in-cell MSE beats the intercept-only model", "[msr]") {
    const Sample s = vshape_sample(400, 0.1, 507);
    const MsrModel model = fit_msr(s, silverman_bandwidth(s));
    for (int c = 0; c < model.n_cells(); ++c) {
        const auto& cell = model.cells[c];
        if (cell.fallback) continue;
        double mse_fit = 0.0, mse_mean = 0.0, mean = 0.0;
        Index count = 0;
        for (Index i = 0; i < s.size(); ++i) {
            if (model.point_cells[i] == c) {
                mean += (*s.response)(i);
                ++count;
            }
        }
        if (count == 0) continue;
        mean /= static_cast<double>(count);
        for (Index i = 0; i < s.size(); ++i) {
            if (model.point_cells[i] != c) continue;
            const double pred = cell.intercept + cell.slope.dot(s.points.row(i));
            mse_fit += std::pow((*s.response)(i) - pred, 2);
            mse_mean += std::pow((*s.response)(i) - mean, 2);
        }
        CHECK(mse_fit <= mse_mean + 1e-9);
    }
}

TEST_CASE("extrapolation raises with a nearest-cell hint", "[msr]") {
    const Sample s = hyperplane_sample(100, 508);
    const MsrModel model = fit_msr(s, silverman_bandwidth(s));
    try {
        model.predict(vec2(50.0, 50.0));
        FAIL("expected ExtrapolationError");
    } catch (const ExtrapolationError& e) {
        CHECK(e.nearest_cell >= 0);
    }
}

TEST_CASE("fit preconditions", "[msr]") {
    Matrix x(3, 2);
    x << 0, 0, 1, 0, 0, 1;
    CHECK_THROWS_AS(fit_msr(Sample(x), 0.5), InvalidArgumentError); // no response
    Vector y(3);
    y << 1, 2, 3;
    CHECK_THROWS_AS(fit_msr(Sample(x, y), 0.5), InvalidArgumentError); // n < d + 2
}

TEST_CASE("cv bandwidth prefers the honest scale on sinusoidal data", "[msr]") {
    Rng rng(509);
    Matrix x(300, 1);
    Vector y(300);
    for (int i = 0; i < 300; ++i) {
        x(i, 0) = 4.0 * rng.uniform01() - 2.0;
        y(i) = std::sin(2.5 * x(i, 0)) + 0.1 * rng.normal();
    }
    const Sample s{Matrix(x), Vector(y)};
    const double h_star = 0.25;
    const double chosen = msr_cv_bandwidth(s, {h_star, 100.0 * h_star}, 4, 11);
    CHECK(chosen == h_star);
}

TEST_CASE("cv bandwidth tie-break and order invariance", "[msr]") {
    // constant response: every h gives identical predictions; largest h wins
    Matrix x(40, 1);
    Vector y = Vector::Constant(40, 3.0);
    Rng rng(510);
    for (int i = 0; i < 40; ++i) x(i, 0) = rng.normal();
    const Sample s{Matrix(x), Vector(y)};
    CHECK(msr_cv_bandwidth(s, {0.3, 0.6, 1.2}, 4, 7) == 1.2);

    // permuting the rows does not change the choice (same seed)
    Rng rng2(511);
    Matrix x2(60, 1);
    Vector y2(60);
    for (int i = 0; i < 60; ++i) {
        x2(i, 0) = 2.0 * rng2.uniform01() - 1.0;
        y2(i) = std::abs(x2(i, 0)) + 0.05 * rng2.normal();
    }
    const Sample orig{Matrix(x2), Vector(y2)};
    std::vector<Index> perm(60);
    std::iota(perm.begin(), perm.end(), Index{0});
    Rng shuffler(512);
    shuffler.shuffle(perm);
    Matrix x3(60, 1);
    Vector y3(60);
    for (int i = 0; i < 60; ++i) {
        x3.row(i) = x2.row(perm[i]);
        y3(i) = y2(perm[i]);
    }
    const Sample shuffled{Matrix(x3), Vector(y3)};
    const std::vector<double> hs = {0.2, 0.5, 1.0};
    CHECK(msr_cv_bandwidth(orig, hs, 5, 13) == msr_cv_bandwidth(shuffled, hs, 5, 13));
}
