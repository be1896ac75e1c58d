#include <catch2/catch_amalgamated.hpp>

#include <msinfer/complex.hpp>
#include <msinfer/rng.hpp>
#include <msinfer/simulation.hpp>

#include "oracles.hpp"

#include <map>
#include <set>

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

class LinearField final : public ScalarField {
public:
    explicit LinearField(Vector slope) : slope_(std::move(slope)) {}
    int dim() const override { return static_cast<int>(slope_.size()); }
    double value(const Vector& x) const override { return slope_.dot(x); }
    Vector gradient(const Vector& x) const override {
        (void)x;
        return slope_;
    }

private:
    Vector slope_;
};

//! Grid-walk oracle on a 1-D lattice: repeatedly step to the best neighbor.
struct GridWalk1D {
    const std::vector<double>& values;
    const std::vector<char>& active;

    int ascend(int i) const {
        for (;;) {
            int best = i;
            if (i > 0 && active[i - 1] && values[i - 1] > values[best]) best = i - 1;
            if (i + 1 < static_cast<int>(values.size()) && active[i + 1] &&
                values[i + 1] > values[best]) {
                best = i + 1;
            }
            if (best == i) return i;
            i = best;
        }
    }

    //! Returns the sink node, or -1 when the walk exits the active region.
    int descend(int i) const {
        for (;;) {
            int best = i;
            double best_val = values[i];
            bool exits = false;
            for (int j : {i - 1, i + 1}) {
                if (j < 0 || j >= static_cast<int>(values.size())) continue;
                if (values[j] < best_val) {
                    if (!active[j]) {
                        exits = true;
                        best = j;
                        best_val = values[j];
                    } else {
                        best = j;
                        best_val = values[j];
                        exits = false;
                    }
                }
            }
            if (best == i) return i;
            if (exits) return -1;
            i = best;
        }
    }
};

} // namespace

TEST_CASE("monotone linear field decomposes into a single cell", "[complex]") {
    LinearField f(vec1(2.0));
    const Box box(vec1(0.0), vec1(1.0));
    const DomainMesh mesh = DomainMesh::lattice(box, 21);
    FlowConfig cfg = FlowConfig::for_scale(0.1, box);
    cfg.boundary = BoundaryPolicy::clamp;
    DecomposeOptions opts;
    opts.floor_frac = 0.0;

    const auto dec = decompose(f, mesh, cfg, opts);
    CHECK(dec.n_cells() == 1);
    REQUIRE(dec.critical.modes.size() == 1);
    REQUIRE(dec.critical.minima.size() == 1);
    CHECK(dec.critical.modes[0].location(0) == Approx(1.0).margin(1e-6));
    CHECK(dec.critical.minima[0].location(0) == Approx(0.0).margin(1e-6));
    CHECK(dec.n_active == 21);
    CHECK(dec.cells[0].members.size() == 21);
}

TEST_CASE("mirror mixture labels match the sign of x1", "[complex]") {
    const MixtureSpec spec = mirror_mixture(2, 3.0, 0.5);
    MixtureField f(spec);
    const Box box(vec2(-3.0, -1.6), vec2(3.0, 1.6));
    const DomainMesh mesh = DomainMesh::lattice(box, 64);
    const FlowConfig cfg = FlowConfig::for_scale(0.25, box);

    const auto dec = decompose(f, mesh, cfg);
    REQUIRE(dec.critical.modes.size() == 2);

    // identify which mode id lives on the positive side
    const int positive_mode = dec.critical.modes[0].location(0) > 0 ? 0 : 1;
    int checked = 0;
    for (Index i = 0; i < mesh.size(); ++i) {
        if (!dec.active[i]) continue;
        const double x1 = mesh.nodes()(i, 0);
        if (std::abs(x1) <= mesh.node_spacing()) continue;
        const int expected = x1 > 0 ? positive_mode : 1 - positive_mode;
        CHECK(dec.labels[i].mode == expected);
        ++checked;
    }
    CHECK(checked > 100);
}

TEST_CASE("1-D three-bump labels equal the grid-walk oracle", "[complex]") {
    auto mean = [](double a) { return vec1(a); };
    const MixtureSpec spec({{mean(-2.0), 0.45, 0.3},
                            {mean(0.1), 0.5, 0.4},
                            {mean(2.3), 0.4, 0.3}});
    MixtureField f(spec);
    const Box box(vec1(-4.0), vec1(4.3));
    const DomainMesh mesh = DomainMesh::lattice(box, 200);
    const FlowConfig cfg = FlowConfig::for_scale(0.2, box);

    const auto dec = decompose(f, mesh, cfg);

    // oracle: recompute activity, then walk the grid
    std::vector<double> values(mesh.size());
    for (Index i = 0; i < mesh.size(); ++i) values[i] = f.value(mesh.node(i));
    const double floor = 0.05 * *std::max_element(values.begin(), values.end());
    std::vector<char> active(mesh.size());
    for (Index i = 0; i < mesh.size(); ++i) active[i] = values[i] >= floor;
    for (Index i = 0; i < mesh.size(); ++i) CHECK(active[i] == dec.active[i]);

    GridWalk1D walk{values, active};
    std::map<std::pair<int, int>, std::set<int>> oracle_groups;
    for (Index i = 0; i < mesh.size(); ++i) {
        if (!active[i]) continue;
        oracle_groups[{walk.ascend(static_cast<int>(i)),
                       walk.descend(static_cast<int>(i))}]
            .insert(static_cast<int>(i));
    }
    std::map<int, std::set<int>> impl_groups;
    for (Index i = 0; i < mesh.size(); ++i) {
        if (dec.cell_of[i] >= 0) impl_groups[dec.cell_of[i]].insert(static_cast<int>(i));
    }
    REQUIRE(oracle_groups.size() == impl_groups.size());
    std::set<std::set<int>> oracle_sets, impl_sets;
    for (auto& [k, v] : oracle_groups) oracle_sets.insert(v);
    for (auto& [k, v] : impl_groups) impl_sets.insert(v);
    CHECK(oracle_sets == impl_sets);

    CHECK(dec.critical.modes.size() == 3);
    CHECK(dec.critical.minima.size() == 2);
}

TEST_CASE("partition, refinement, and cell-count invariants", "[complex]") {
    const Sample s = sample_mixture(mirror_mixture(2, 3.0, 0.5), 400, 17);
    const double h = silverman_bandwidth(s);
    KdeField f(s.points, h);
    const FlowConfig cfg = FlowConfig::for_kde(f);
    const DomainMesh mesh = DomainMesh::lattice(cfg.box, 48);

    const auto dec = decompose(f, mesh, cfg);
    CHECK(dec.n_unassigned == 0);

    std::size_t member_total = 0;
    for (const auto& cell : dec.cells) {
        member_total += cell.members.size();
        CHECK(cell.mode_id >= 0);
        CHECK((cell.min_id >= 0 || cell.min_id == kDivergedMin));
        // refinement: a cell maps to exactly one mode
        for (Index node : cell.members) CHECK(dec.labels[node].mode == cell.mode_id);
    }
    CHECK(member_total == static_cast<std::size_t>(dec.n_active));
    CHECK(dec.n_cells() <= static_cast<int>(dec.critical.modes.size() *
                                            (dec.critical.minima.size() + 1)));

    // every (mode,min) pair appears exactly once in the registry
    std::set<std::pair<int, int>> keys;
    for (const auto& cell : dec.cells) {
        CHECK(keys.emplace(cell.mode_id, cell.min_id).second);
    }
}

TEST_CASE("cell stats volumes and mirror symmetry", "[complex]") {
    LinearField f(vec2(1.0, 0.5));
    const Box box(vec2(0.0, 0.0), vec2(1.0, 1.0));
    FlowConfig cfg = FlowConfig::for_scale(0.1, box);
    cfg.boundary = BoundaryPolicy::clamp;
    DecomposeOptions opts;
    opts.floor_frac = 0.0;
    const auto dec = decompose(f, DomainMesh::lattice(box, 64), cfg, opts);
    REQUIRE(dec.n_cells() == 1);
    const CellStats stats = cell_stats(dec);
    CHECK(stats.volumes[0] == Approx(1.0).margin(0.05));
    CHECK(stats.boundary(0, 0) == 0.0);

    // mirror two-bump: two cells of nearly equal volume, boundary length ~ 1
    const MixtureSpec spec({{vec2(0.25, 0.5), 0.12, 0.5}, {vec2(0.75, 0.5), 0.12, 0.5}});
    MixtureField mix(spec);
    FlowConfig mix_cfg = FlowConfig::for_scale(0.06, box);
    DecomposeOptions mix_opts;
    mix_opts.floor_frac = 0.0;
    const auto dec2 = decompose(mix, DomainMesh::lattice(box, 50), mix_cfg, mix_opts);
    REQUIRE(dec2.n_cells() == 2);
    const CellStats stats2 = cell_stats(dec2);
    CHECK(stats2.volumes[0] == Approx(stats2.volumes[1]).epsilon(0.05));
    CHECK(stats2.boundary(0, 1) == Approx(1.0).epsilon(0.10));
    CHECK(stats2.boundary(0, 1) == stats2.boundary(1, 0));
}

TEST_CASE("boundary nodes sit on the mirror plane", "[complex]") {
    // 4-sigma separation keeps the saddle region above the 5% floor
    const MixtureSpec spec = mirror_mixture(2, 2.0, 0.5);
    MixtureField f(spec);
    const Box box(vec2(-2.5, -1.6), vec2(2.5, 1.6));
    const auto dec =
        decompose(f, DomainMesh::lattice(box, 64), FlowConfig::for_scale(0.25, box));

    const Matrix bnd = boundary_nodes(dec, BoundaryKeying::mode);
    REQUIRE(bnd.rows() > 0);
    for (Index i = 0; i < bnd.rows(); ++i) {
        CHECK(std::abs(bnd(i, 0)) <= dec.mesh.node_spacing() + 1e-12);
    }

    // single label -> empty set, not an error
    LinearField lin(vec2(1.0, 0.5)); // tilted: the box maximum is one corner
    FlowConfig cfg = FlowConfig::for_scale(0.1, box);
    cfg.boundary = BoundaryPolicy::clamp;
    DecomposeOptions opts;
    opts.floor_frac = 0.0;
    const auto dec1 = decompose(lin, DomainMesh::lattice(box, 16), cfg, opts);
    CHECK(boundary_nodes(dec1, BoundaryKeying::mode).rows() == 0);
}

TEST_CASE("1-D three-bump boundary points match oracle watersheds", "[complex]") {
    auto mean = [](double a) { return vec1(a); };
    const MixtureSpec spec({{mean(-2.0), 0.45, 0.3},
                            {mean(0.1), 0.5, 0.4},
                            {mean(2.3), 0.4, 0.3}});
    MixtureField f(spec);
    const Box box(vec1(-4.0), vec1(4.3));
    const DomainMesh mesh = DomainMesh::lattice(box, 200);
    const auto dec = decompose(f, mesh, FlowConfig::for_scale(0.2, box));

    const Matrix bnd = boundary_nodes(dec, BoundaryKeying::mode);
    REQUIRE(bnd.rows() == 2);

    // oracle: the two interior density minima located by dense scan
    const double m1 =
        oracle::grid_argmin([&](double x) { return f.value(vec1(x)); }, -2.0, 0.1, 40000);
    const double m2 =
        oracle::grid_argmin([&](double x) { return f.value(vec1(x)); }, 0.1, 2.3, 40000);
    std::vector<double> found = {bnd(0, 0), bnd(1, 0)};
    std::sort(found.begin(), found.end());
    CHECK(std::abs(found[0] - m1) <= mesh.node_spacing());
    CHECK(std::abs(found[1] - m2) <= mesh.node_spacing());
}

TEST_CASE("hausdorff distance", "[complex]") {
    Matrix a(1, 1), b(2, 1);
    a << 0.0;
    b << 0.0, 3.0;
    CHECK(hausdorff(a, a) == 0.0);
    CHECK(hausdorff(a, b) == Approx(3.0));

    Rng rng(99);
    for (int t = 0; t < 5; ++t) {
        Matrix p(20, 2), q(20, 2);
        for (int i = 0; i < 20; ++i) {
            p(i, 0) = rng.normal();
            p(i, 1) = rng.normal();
            q(i, 0) = rng.normal();
            q(i, 1) = rng.normal();
        }
        CHECK(hausdorff(p, q) == oracle::hausdorff_brute(p, q));
        CHECK(hausdorff(p, q) == hausdorff(q, p));
    }

    CHECK_THROWS_AS(hausdorff(Matrix(0, 1), b), InvalidArgumentError);
}

TEST_CASE("knn backend reproduces the lattice mirror split", "[complex]") {
    const Sample s = sample_mixture(mirror_mixture(2, 3.0, 0.4), 600, 23);
    const double h = silverman_bandwidth(s);
    KdeField f(s.points, h);
    const FlowConfig cfg = FlowConfig::for_kde(f);

    const DomainMesh mesh = DomainMesh::knn_graph(s.points, 8);
    const auto dec = decompose(f, mesh, cfg);
    REQUIRE(dec.critical.modes.size() == 2);
    CHECK(dec.n_unassigned == 0);

    const int positive_mode = dec.critical.modes[0].location(0) > 0 ? 0 : 1;
    Index agree = 0, checked = 0;
    for (Index i = 0; i < mesh.size(); ++i) {
        if (!dec.active[i]) continue;
        if (std::abs(mesh.nodes()(i, 0)) < 0.3) continue;
        const int expected = mesh.nodes()(i, 0) > 0 ? positive_mode : 1 - positive_mode;
        agree += dec.labels[i].mode == expected;
        ++checked;
    }
    REQUIRE(checked > 100);
    CHECK(static_cast<double>(agree) / static_cast<double>(checked) > 0.97);

    const CellStats stats = cell_stats(dec);
    CHECK(stats.boundary_is_edge_count);
}

TEST_CASE("decompose rejects an all-inactive mesh", "[complex]") {
    Matrix pts(20, 1);
    for (int i = 0; i < 20; ++i) pts(i, 0) = 0.01 * i;
    KdeField f(pts, 0.05);
    const FlowConfig cfg = FlowConfig::for_kde(f);
    DecomposeOptions opts;
    opts.floor_frac = 1.1; // floor above the maximum: nothing survives
    CHECK_THROWS_AS(decompose(f, DomainMesh::lattice(cfg.box, 8), cfg, opts),
                    NumericalError);
}
