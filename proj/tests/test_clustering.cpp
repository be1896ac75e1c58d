#include <catch2/catch_amalgamated.hpp>

#include <msinfer/clustering.hpp>
#include <msinfer/simulation.hpp>

#include "oracles.hpp"

#include <algorithm>

using namespace msinfer;
using Catch::Approx;

TEST_CASE("single point clusters to itself", "[clustering]") {
    Matrix pts(1, 2);
    pts << 0.4, -0.7;
    const auto assignment = mode_cluster(Sample(pts), 0.5);
    REQUIRE(assignment.labels.size() == 1);
    CHECK(assignment.labels[0] == 0);
    CHECK(assignment.mode_locations.rows() == 1);
    CHECK((assignment.mode_locations.row(0).transpose() - pts.row(0).transpose()).norm() ==
          Approx(0.0).margin(1e-12));
}

TEST_CASE("mirror mixture clusters match the sign oracle", "[clustering]") {
    const Sample s = sample_mixture(mirror_mixture(2, 3.0, 0.5), 500, 31);
    const double h = silverman_bandwidth(s);
    const auto assignment = mode_cluster(s, h);
    CHECK(assignment.n_unassigned == 0);

    std::vector<int> oracle(s.size());
    for (Index i = 0; i < s.size(); ++i) oracle[i] = s.points(i, 0) > 0 ? 1 : 0;
    CHECK(label_match_accuracy(assignment.labels, oracle) >= 0.99);
    CHECK(assignment.mode_locations.rows() == 2);
}

TEST_CASE("uniform duplication leaves labels unchanged", "[clustering]") {
    const Sample s = sample_mixture(mirror_mixture(2, 3.0, 0.5), 200, 37);
    const double h = silverman_bandwidth(s);
    const auto base = mode_cluster(s, h);

    Matrix doubled(2 * s.size(), 2);
    doubled << s.points, s.points;
    const auto dup = mode_cluster(Sample(doubled), h);
    for (Index i = 0; i < s.size(); ++i) {
        CHECK(dup.labels[i] == base.labels[i]);
        CHECK(dup.labels[i + s.size()] == base.labels[i]);
    }
}

TEST_CASE("rand index examples", "[clustering]") {
    const std::vector<int> a = {1, 1, 2};
    const std::vector<int> b = {1, 2, 2};
    CHECK(rand_index(a, b) == Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(rand_index(a, a) == 1.0);

    // invariant to label renaming
    const std::vector<int> renamed = {7, 7, 3};
    CHECK(rand_index(a, renamed) == 1.0);

    // symmetric
    CHECK(rand_index(a, b) == rand_index(b, a));

    // matches the brute-force oracle on random partitions
    Rng rng(41);
    for (int t = 0; t < 20; ++t) {
        std::vector<int> x(12), y(12);
        for (int i = 0; i < 12; ++i) {
            x[i] = static_cast<int>(rng.uniform_index(3));
            y[i] = static_cast<int>(rng.uniform_index(4));
        }
        CHECK(rand_index(x, y) == Approx(oracle::rand_index_brute(x, y)).epsilon(1e-12));
    }

    CHECK_THROWS_AS(rand_index(a, std::vector<int>{1, 2}), InvalidArgumentError);
    CHECK_THROWS_AS(rand_index(std::vector<int>{1}, std::vector<int>{1}),
                    InvalidArgumentError);
}

TEST_CASE("unassigned points are excluded from the rand index", "[clustering]") {
    const std::vector<int> a = {0, 0, 1, kUnassignedLabel};
    const std::vector<int> b = {0, 0, 1, 1};
    CHECK(rand_index(a, b) == 1.0);
}

TEST_CASE("label matching maximizes agreement", "[clustering]") {
    // permuted label names agree fully after matching
    const std::vector<int> a = {0, 0, 1, 1, 2, 2};
    const std::vector<int> b = {2, 2, 0, 0, 1, 1};
    CHECK(label_match_accuracy(a, b) == 1.0);

    // one mislabeled point out of six
    const std::vector<int> c = {2, 2, 0, 1, 1, 1};
    CHECK(label_match_accuracy(a, c) == Approx(5.0 / 6.0));

    // different numbers of clusters
    const std::vector<int> d = {0, 0, 0, 0, 1, 1};
    CHECK(label_match_accuracy(a, d) == Approx(4.0 / 6.0));
}

TEST_CASE("rand index versus the sign oracle is high at moderate n", "[clustering]") {
    const Sample s = sample_mixture(mirror_mixture(2, 3.0, 0.5), 1000, 43);
    const auto assignment = mode_cluster(s, silverman_bandwidth(s));
    std::vector<int> oracle(s.size());
    for (Index i = 0; i < s.size(); ++i) oracle[i] = s.points(i, 0) > 0 ? 1 : 0;
    CHECK(rand_index(assignment.labels, oracle) >= 0.95);
}
