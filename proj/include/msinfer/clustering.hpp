#pragma once

#include "complex.hpp"
#include "errors.hpp"
#include "flow.hpp"
#include "kernel.hpp"
#include "parallel.hpp"
#include "types.hpp"

#include <algorithm>
#include <vector>

namespace msinfer {

inline constexpr int kUnassignedLabel = -1;

struct ClusterAssignment {
    std::vector<int> labels;   // kUnassignedLabel where the ascent failed
    Matrix mode_locations;     // k x d, in the data's original coordinates
    double h = 0.0;
    int n_unassigned = 0;
};

//! Mode clustering: standardize, build the KDE, ascend from every data
//! point, merge destinations, and label points by their destination mode.
//! Bandwidth h is on the standardized scale (silverman_bandwidth's scale).
inline ClusterAssignment mode_cluster(const Sample& sample, double h,
                                      const FlowConfig* cfg_in = nullptr) {
    if (!(h > 0.0)) throw InvalidArgumentError("mode_cluster: h must be positive");
    const Index n = sample.size();
    ClusterAssignment out;
    out.h = h;
    if (n == 1) {
        out.labels = {0};
        out.mode_locations = sample.points;
        return out;
    }

    const Standardizer st = Standardizer::fit(sample.points);
    const Matrix z = st.apply(sample.points);
    const KdeField field(z, h);
    const FlowConfig cfg = cfg_in ? *cfg_in : FlowConfig::for_kde(field);

    // discovery pass over a stride subsample
    const Index stride = std::max<Index>(1, n / 256);
    std::vector<Index> seed_rows;
    for (Index i = 0; i < n; i += stride) seed_rows.push_back(i);
    std::vector<FlowResult> seed_flows(seed_rows.size());
    parallel_for(seed_rows.size(), [&](std::size_t s) {
        seed_flows[s] = ascend(field, z.row(seed_rows[s]).transpose(), cfg);
    });
    std::vector<CriticalPoint> cands;
    for (const auto& r : seed_flows) {
        if (r.converged()) cands.push_back({r.destination, field.value(r.destination)});
    }
    std::vector<CriticalPoint> registry =
        detail::merge_critical_points(std::move(cands), cfg.merge_radius, true);

    // labeling pass with snapping
    const SnapTargets snap{&registry, 0.5 * cfg.merge_radius};
    std::vector<detail::Endpoint> endpoints(n);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        int snapped = -1;
        const FlowResult r = ascend(field, z.row(static_cast<Index>(i)).transpose(), cfg,
                                    nullptr, &snap, &snapped);
        endpoints[i] = {snapped, r.outcome, r.destination};
    });
    out.labels = detail::resolve_endpoints(endpoints, field, cfg.merge_radius, registry,
                                           kUnassignedLabel, &out.n_unassigned);
    registry = detail::canonicalize(std::move(registry), true, out.labels,
                                    std::numeric_limits<int>::min());

    out.mode_locations.resize(static_cast<Index>(registry.size()), sample.dim());
    for (std::size_t k = 0; k < registry.size(); ++k) {
        out.mode_locations.row(static_cast<Index>(k)) =
            st.invert(registry[k].location).transpose();
    }
    return out;
}

//! Rand index between two label vectors: the proportion of point pairs on
//! whose co-membership the two partitions agree. Pairs touching an
//! unassigned point are excluded.
inline double rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw InvalidArgumentError("rand_index: length mismatch");
    if (a.size() < 2) throw InvalidArgumentError("rand_index: need n >= 2");
    const std::size_t n = a.size();
    double disagreements = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (a[i] < 0 || b[i] < 0) continue;
        for (std::size_t j = i + 1; j < n; ++j) {
            if (a[j] < 0 || b[j] < 0) continue;
            const int same_a = a[i] == a[j] ? 1 : 0;
            const int same_b = b[i] == b[j] ? 1 : 0;
            disagreements += same_a == same_b ? 0.0 : 1.0;
            pairs += 1.0;
        }
    }
    if (pairs == 0.0) throw InvalidArgumentError("rand_index: no assigned pairs");
    return 1.0 - disagreements / pairs;
}

inline double rand_index(const ClusterAssignment& a, const ClusterAssignment& b) {
    return rand_index(a.labels, b.labels);
}

namespace detail {

//! Hungarian algorithm (potentials form); returns row -> column of the
//! minimum-cost perfect assignment on a square cost matrix.
inline std::vector<int> hungarian_min_assign(const Matrix& cost) {
    const int n = static_cast<int>(cost.rows());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = 0;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= n; ++j) {
        if (p[j] >= 1) row_to_col[p[j] - 1] = j - 1;
    }
    return row_to_col;
}

} // namespace detail

//! Fraction of points whose labels agree after the best one-to-one label
//! matching (maximum-weight bipartite matching on the confusion matrix).
//! Unassigned points are excluded.
inline double label_match_accuracy(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) {
        throw InvalidArgumentError("label_match_accuracy: length mismatch");
    }
    int ka = 0, kb = 0;
    std::size_t counted = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] < 0 || b[i] < 0) continue;
        ka = std::max(ka, a[i] + 1);
        kb = std::max(kb, b[i] + 1);
        ++counted;
    }
    if (counted == 0) throw InvalidArgumentError("label_match_accuracy: nothing assigned");
    const int k = std::max(ka, kb);
    Matrix confusion = Matrix::Zero(k, k);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] < 0 || b[i] < 0) continue;
        confusion(a[i], b[i]) += 1.0;
    }
    const Matrix cost = Matrix::Constant(k, k, confusion.maxCoeff()) - confusion;
    const std::vector<int> match = detail::hungarian_min_assign(cost);
    double agreed = 0.0;
    for (int i = 0; i < k; ++i) {
        if (match[i] >= 0) agreed += confusion(i, match[i]);
    }
    return agreed / static_cast<double>(counted);
}

} // namespace msinfer
