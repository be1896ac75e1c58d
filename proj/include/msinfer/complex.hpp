#pragma once

#include "errors.hpp"
#include "field.hpp"
#include "flow.hpp"
#include "mesh.hpp"
#include "parallel.hpp"
#include "types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <vector>

namespace msinfer {

//! Reserved label ids.
inline constexpr int kUnlabeled = -1;   // flow failed to converge; no cell
inline constexpr int kDivergedMin = -2; // descent flowed to infinity (pseudo-minimum)

struct NodeLabel {
    int mode = kUnlabeled;
    int min = kUnlabeled;
};

//! One d-cell: the active nodes sharing a (mode, min) destination pair.
struct Cell {
    int mode_id = kUnlabeled;
    int min_id = kUnlabeled;
    std::vector<Index> members;
};

struct DecomposeOptions {
    // lambda_floor = floor_frac * max node value of the mask field; nodes
    // below the floor are inactive. floor_frac <= 0 disables flooring.
    double floor_frac = 0.05;
    // Activity/floor mask; defaults to the decomposed field itself. Pipelines
    // decomposing a signed field (density difference, regression pilot) pass
    // a nonnegative mask here (pooled density) or disable the floor.
    const ScalarField* mask_field = nullptr;
    // Seed budget for the critical-point discovery pass (lattice backend).
    int discovery_seeds = 256;
};

class ComplexDecomposition {
public:
    DomainMesh mesh;
    std::vector<NodeLabel> labels;   // per node
    std::vector<char> active;        // per node
    std::vector<double> node_values; // field at nodes (NaN where not evaluable)
    std::vector<int> cell_of;        // per node; -1 when inactive or unlabeled
    std::vector<Cell> cells;
    CriticalSet critical;
    double floor_value = -std::numeric_limits<double>::infinity();
    double floor_frac = 0.0;
    bool floored = false;
    Index n_active = 0;
    int n_unassigned = 0;

    int n_cells() const { return static_cast<int>(cells.size()); }

    int cell_index(int mode_id, int min_id) const {
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (cells[c].mode_id == mode_id && cells[c].min_id == min_id) {
                return static_cast<int>(c);
            }
        }
        return -1;
    }

    //! Nearest node among the active ones; falls back to a scan when the
    //! geometrically nearest node is inactive.
    Index nearest_active_node(const Vector& x) const {
        const Index guess = mesh.nearest_node(x);
        if (active[guess]) return guess;
        Index best = -1;
        double best_dist = std::numeric_limits<double>::infinity();
        for (Index i = 0; i < mesh.size(); ++i) {
            if (!active[i]) continue;
            const double dist = (mesh.nodes().row(i).transpose() - x).squaredNorm();
            if (dist < best_dist) {
                best_dist = dist;
                best = i;
            }
        }
        return best;
    }

    //! Cell of the nearest active node; -1 if that node carries no cell.
    int cell_at(const Vector& x) const {
        const Index node = nearest_active_node(x);
        return node < 0 ? -1 : cell_of[node];
    }
};

namespace detail {

//! Per-node flow endpoint from the lattice labeling pass.
struct Endpoint {
    int snapped = -1; // id into the discovery critical list
    FlowOutcome outcome = FlowOutcome::max_iters;
    Vector destination;
};

//! Resolve endpoints into final critical ids, appending destinations that
//! did not merge into any known critical point. Sequential and order-stable.
inline std::vector<int> resolve_endpoints(const std::vector<Endpoint>& endpoints,
                                          const ScalarField& field, double merge_radius,
                                          std::vector<CriticalPoint>& registry,
                                          int diverged_label, int* n_unassigned) {
    std::vector<int> out(endpoints.size(), kUnlabeled);
    for (std::size_t e = 0; e < endpoints.size(); ++e) {
        const Endpoint& ep = endpoints[e];
        if (ep.snapped >= 0) {
            out[e] = ep.snapped;
            continue;
        }
        switch (ep.outcome) {
            case FlowOutcome::converged: {
                int best = -1;
                double best_dist = merge_radius;
                for (std::size_t m = 0; m < registry.size(); ++m) {
                    const double dist = (registry[m].location - ep.destination).norm();
                    if (dist <= best_dist) {
                        best_dist = dist;
                        best = static_cast<int>(m);
                    }
                }
                if (best < 0) {
                    best = static_cast<int>(registry.size());
                    registry.push_back({ep.destination, field.value(ep.destination)});
                }
                out[e] = best;
                break;
            }
            case FlowOutcome::diverged:
                out[e] = diverged_label;
                break;
            default:
                out[e] = kUnlabeled;
                if (n_unassigned) ++*n_unassigned;
                break;
        }
    }
    return out;
}

//! Sort a critical registry canonically and rewrite labels in place.
inline std::vector<CriticalPoint> canonicalize(std::vector<CriticalPoint> registry,
                                               bool take_max, std::vector<int>& labels_in,
                                               int pass_through_label) {
    std::vector<int> order(registry.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (registry[a].value != registry[b].value) {
            return take_max ? registry[a].value > registry[b].value
                            : registry[a].value < registry[b].value;
        }
        return lex_less(registry[a].location, registry[b].location);
    });
    std::vector<int> rank(registry.size());
    for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = static_cast<int>(r);
    std::vector<CriticalPoint> sorted(registry.size());
    for (std::size_t r = 0; r < order.size(); ++r) sorted[r] = registry[order[r]];
    for (int& lab : labels_in) {
        if (lab >= 0) {
            lab = rank[lab];
        } else if (lab != pass_through_label) {
            lab = kUnlabeled;
        }
    }
    return sorted;
}

} // namespace detail

//! Build the Morse-Smale decomposition of `field` over `mesh`.
//
// The lattice backend labels each active node by the destinations of the
// continuous ascent/descent flows. The kNN backend follows steepest
// ascent/descent neighbor walks on the graph and merges the sink nodes with
// the same single-linkage rule the flows use.
inline ComplexDecomposition decompose(const ScalarField& field, DomainMesh mesh,
                                      const FlowConfig& cfg,
                                      const DecomposeOptions& opts = {}) {
    cfg.validate();
    const Index m = mesh.size();
    ComplexDecomposition dec;
    dec.floor_frac = opts.floor_frac;
    dec.floored = opts.floor_frac > 0.0;

    // node values and activity mask
    dec.node_values.assign(m, std::numeric_limits<double>::quiet_NaN());
    std::vector<double> mask(m, std::numeric_limits<double>::quiet_NaN());
    std::vector<char> evaluable(m, 0);
    const ScalarField* mask_field = opts.mask_field ? opts.mask_field : &field;
    parallel_for(static_cast<std::size_t>(m), [&](std::size_t i) {
        const Vector x = mesh.node(static_cast<Index>(i));
        try {
            dec.node_values[i] = field.value(x);
            mask[i] = mask_field == &field ? dec.node_values[i] : mask_field->value(x);
            evaluable[i] = 1;
        } catch (const NumericalError&) {
            evaluable[i] = 0;
        }
    });

    double mask_max = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < m; ++i) {
        if (evaluable[i]) mask_max = std::max(mask_max, mask[i]);
    }
    if (dec.floored) dec.floor_value = opts.floor_frac * mask_max;

    dec.active.assign(m, 0);
    std::vector<Index> active_nodes;
    for (Index i = 0; i < m; ++i) {
        if (evaluable[i] && (!dec.floored || mask[i] >= dec.floor_value)) {
            dec.active[i] = 1;
            active_nodes.push_back(i);
        }
    }
    dec.n_active = static_cast<Index>(active_nodes.size());
    if (active_nodes.empty()) {
        throw NumericalError("decompose: no active nodes (empty decomposition)");
    }

    FlowConfig flow_cfg = cfg;
    if (dec.floored) {
        flow_cfg.descent_floor = dec.floor_value;
        flow_cfg.descent_floor_field = opts.mask_field; // nullptr = the field itself
    }

    std::vector<int> mode_labels(active_nodes.size(), kUnlabeled);
    std::vector<int> min_labels(active_nodes.size(), kUnlabeled);
    std::vector<CriticalPoint> mode_registry, min_registry;

    if (mesh.kind() == MeshKind::lattice) {
        // discovery pass: full flows from a stride subsample of active nodes
        const std::size_t stride =
            std::max<std::size_t>(1, active_nodes.size() /
                                         std::max(1, opts.discovery_seeds));
        std::vector<Index> seeds;
        for (std::size_t i = 0; i < active_nodes.size(); i += stride) {
            seeds.push_back(active_nodes[i]);
        }
        std::vector<FlowResult> seed_up(seeds.size()), seed_down(seeds.size());
        parallel_for(seeds.size(), [&](std::size_t s) {
            const Vector x = mesh.node(seeds[s]);
            seed_up[s] = ascend(field, x, flow_cfg);
            seed_down[s] = descend(field, x, flow_cfg);
        });
        std::vector<CriticalPoint> mode_cands, min_cands;
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            if (seed_up[s].converged()) {
                mode_cands.push_back(
                    {seed_up[s].destination, field.value(seed_up[s].destination)});
            }
            if (seed_down[s].converged()) {
                min_cands.push_back(
                    {seed_down[s].destination, field.value(seed_down[s].destination)});
            }
        }
        mode_registry =
            detail::merge_critical_points(std::move(mode_cands), cfg.merge_radius, true);
        min_registry =
            detail::merge_critical_points(std::move(min_cands), cfg.merge_radius, false);

        // labeling pass: snapped flows from every active node
        const double snap_radius = 0.5 * cfg.merge_radius;
        const SnapTargets snap_modes{&mode_registry, snap_radius};
        const SnapTargets snap_minima{&min_registry, snap_radius};
        std::vector<detail::Endpoint> up(active_nodes.size()), down(active_nodes.size());
        parallel_for(active_nodes.size(), [&](std::size_t i) {
            const Vector x = mesh.node(active_nodes[i]);
            int snapped = -1;
            FlowResult r = ascend(field, x, flow_cfg, nullptr, &snap_modes, &snapped);
            up[i] = {snapped, r.outcome, r.destination};
            snapped = -1;
            r = descend(field, x, flow_cfg, nullptr, &snap_minima, &snapped);
            down[i] = {snapped, r.outcome, r.destination};
        });

        mode_labels = detail::resolve_endpoints(up, field, cfg.merge_radius,
                                                mode_registry, kUnlabeled,
                                                &dec.n_unassigned);
        min_labels = detail::resolve_endpoints(down, field, cfg.merge_radius,
                                               min_registry, kDivergedMin, nullptr);
    } else {
        // steepest-slope walks on the active subgraph
        const auto& adj = mesh.adjacency();
        const Index total = mesh.size();
        std::vector<Index> next_up(total, -1), next_down(total, -1);
        std::vector<char> down_diverges(total, 0);
        for (Index i : active_nodes) {
            double best_up = 0.0, best_down = 0.0;
            for (Index j : adj[i]) {
                if (!evaluable[j]) continue;
                const double dist = (mesh.nodes().row(i) - mesh.nodes().row(j)).norm();
                if (!(dist > 0.0)) continue;
                const double slope = (dec.node_values[j] - dec.node_values[i]) / dist;
                if (dec.active[j] && slope > best_up) {
                    best_up = slope;
                    next_up[i] = j;
                }
                if (slope < best_down) {
                    best_down = slope;
                    next_down[i] = j;
                }
            }
            if (next_down[i] >= 0 && !dec.active[next_down[i]]) {
                down_diverges[i] = 1; // steepest descent exits the active region
                next_down[i] = -1;
            }
        }

        // resolve walks by path compression
        std::vector<int> up_sink(total, -3), down_sink(total, -3);
        auto resolve = [](Index start, const std::vector<Index>& next,
                          const std::vector<char>& diverges, std::vector<int>& sink) {
            std::vector<Index> path;
            Index cur = start;
            while (sink[cur] == -3) {
                path.push_back(cur);
                if (!diverges.empty() && diverges[cur]) {
                    sink[cur] = kDivergedMin;
                    break;
                }
                if (next[cur] < 0) {
                    sink[cur] = static_cast<int>(cur);
                    break;
                }
                cur = next[cur];
            }
            const int dest = sink[cur];
            for (Index n : path) sink[n] = dest;
        };
        const std::vector<char> no_divergence;
        for (Index i : active_nodes) {
            resolve(i, next_up, no_divergence, up_sink);
            resolve(i, next_down, down_diverges, down_sink);
        }

        // Graph walks over-produce sinks (a locally highest sample point is a
        // sink even when the field keeps rising beyond its neighborhood), so
        // each sink is refined by the continuous flow before merging. On a
        // KDE this also sends spurious graph minima to the diverged label.
        std::vector<Index> mode_sinks, min_sinks;
        for (Index i : active_nodes) {
            if (up_sink[i] == static_cast<int>(i)) mode_sinks.push_back(i);
            if (down_sink[i] == static_cast<int>(i)) min_sinks.push_back(i);
        }
        std::vector<FlowResult> sink_up(mode_sinks.size()), sink_down(min_sinks.size());
        parallel_for(mode_sinks.size(), [&](std::size_t s) {
            sink_up[s] = ascend(field, mesh.node(mode_sinks[s]), flow_cfg);
        });
        parallel_for(min_sinks.size(), [&](std::size_t s) {
            sink_down[s] = descend(field, mesh.node(min_sinks[s]), flow_cfg);
        });

        std::vector<CriticalPoint> mode_cands;
        for (std::size_t s = 0; s < mode_sinks.size(); ++s) {
            if (sink_up[s].converged()) {
                mode_cands.push_back(
                    {sink_up[s].destination, field.value(sink_up[s].destination)});
            } else {
                mode_cands.push_back(
                    {mesh.node(mode_sinks[s]), dec.node_values[mode_sinks[s]]});
            }
        }
        std::vector<CriticalPoint> min_cands;
        std::vector<int> min_cand_of_sink(min_sinks.size(), kDivergedMin);
        for (std::size_t s = 0; s < min_sinks.size(); ++s) {
            if (sink_down[s].converged()) {
                min_cand_of_sink[s] = static_cast<int>(min_cands.size());
                min_cands.push_back(
                    {sink_down[s].destination, field.value(sink_down[s].destination)});
            } // diverged sinks keep the diverged label
        }
        const auto merged_modes =
            detail::merge_with_assignment(mode_cands, cfg.merge_radius, true);
        const auto merged_minima =
            detail::merge_with_assignment(min_cands, cfg.merge_radius, false);
        mode_registry = merged_modes.reps;
        min_registry = merged_minima.reps;

        std::map<Index, int> mode_of_sink, min_of_sink;
        for (std::size_t s = 0; s < mode_sinks.size(); ++s) {
            mode_of_sink[mode_sinks[s]] = merged_modes.assignment[s];
        }
        for (std::size_t s = 0; s < min_sinks.size(); ++s) {
            min_of_sink[min_sinks[s]] = min_cand_of_sink[s] == kDivergedMin
                                            ? kDivergedMin
                                            : merged_minima.assignment[min_cand_of_sink[s]];
        }
        for (std::size_t i = 0; i < active_nodes.size(); ++i) {
            const Index node = active_nodes[i];
            mode_labels[i] = mode_of_sink.at(up_sink[node]);
            min_labels[i] = down_sink[node] == kDivergedMin
                                ? kDivergedMin
                                : min_of_sink.at(down_sink[node]);
        }
    }

    // canonical critical ordering (also rewrites labels)
    mode_registry = detail::canonicalize(std::move(mode_registry), true, mode_labels,
                                         std::numeric_limits<int>::min());
    min_registry =
        detail::canonicalize(std::move(min_registry), false, min_labels, kDivergedMin);
    dec.critical.modes = std::move(mode_registry);
    dec.critical.minima = std::move(min_registry);
    dec.critical.merge_radius = cfg.merge_radius;

    // write per-node labels
    dec.labels.assign(m, NodeLabel{});
    for (std::size_t i = 0; i < active_nodes.size(); ++i) {
        dec.labels[active_nodes[i]] = NodeLabel{mode_labels[i], min_labels[i]};
    }

    // cell registry over distinct (mode, min) pairs, ordered by ids with the
    // diverged pseudo-minimum last
    std::map<std::pair<int, int>, int> registry;
    auto cell_key = [](const NodeLabel& lab) {
        const int min_key =
            lab.min == kDivergedMin ? std::numeric_limits<int>::max() : lab.min;
        return std::make_pair(lab.mode, min_key);
    };
    for (Index node : active_nodes) {
        const NodeLabel& lab = dec.labels[node];
        if (lab.mode < 0 || lab.min == kUnlabeled) continue;
        registry.emplace(cell_key(lab), 0);
    }
    int next_id = 0;
    for (auto& [key, id] : registry) id = next_id++;

    dec.cells.assign(registry.size(), Cell{});
    dec.cell_of.assign(m, -1);
    for (Index node : active_nodes) {
        const NodeLabel& lab = dec.labels[node];
        if (lab.mode < 0 || lab.min == kUnlabeled) continue;
        const int id = registry.at(cell_key(lab));
        Cell& cell = dec.cells[id];
        cell.mode_id = lab.mode;
        cell.min_id = lab.min;
        cell.members.push_back(node);
        dec.cell_of[node] = id;
    }

    dec.mesh = std::move(mesh);
    return dec;
}

//! Per-cell centers, volumes, and the shared-boundary matrix.
struct CellStats {
    Matrix centers;                     // L x d
    std::vector<double> volumes;        // L
    Matrix boundary;                    // L x L, symmetric, zero diagonal
    bool boundary_is_edge_count = false;
};

inline CellStats cell_stats(const ComplexDecomposition& dec) {
    const int L = dec.n_cells();
    if (L < 1) throw InvalidArgumentError("cell_stats: decomposition has no cells");
    const int d = dec.mesh.dim();
    CellStats stats;
    stats.centers = Matrix::Zero(L, d);
    stats.volumes.assign(L, 0.0);
    stats.boundary = Matrix::Zero(L, L);
    stats.boundary_is_edge_count = dec.mesh.kind() == MeshKind::knn_graph;

    for (int c = 0; c < L; ++c) {
        const auto& members = dec.cells[c].members;
        for (Index node : members) stats.centers.row(c) += dec.mesh.nodes().row(node);
        if (!members.empty()) stats.centers.row(c) /= static_cast<double>(members.size());
        if (dec.mesh.kind() == MeshKind::lattice) {
            stats.volumes[c] = static_cast<double>(members.size()) * dec.mesh.node_volume();
        } else {
            stats.volumes[c] = static_cast<double>(members.size()) /
                               static_cast<double>(dec.mesh.size()) *
                               dec.mesh.box().volume();
        }
    }

    dec.mesh.for_each_edge([&](Index i, Index j, int axis) {
        const int ci = dec.cell_of[i];
        const int cj = dec.cell_of[j];
        if (ci < 0 || cj < 0 || ci == cj) return;
        const double w =
            dec.mesh.kind() == MeshKind::lattice ? dec.mesh.face_area(axis) : 1.0;
        stats.boundary(ci, cj) += w;
        stats.boundary(cj, ci) += w;
    });
    return stats;
}

enum class BoundaryKeying { mode, min, cell };

//! Midpoints of mesh edges whose endpoints differ under the chosen keying.
inline Matrix boundary_nodes(const ComplexDecomposition& dec, BoundaryKeying by) {
    auto key = [&](Index node) -> int {
        switch (by) {
            case BoundaryKeying::mode: return dec.labels[node].mode;
            case BoundaryKeying::min: return dec.labels[node].min;
            case BoundaryKeying::cell: return dec.cell_of[node];
        }
        return kUnlabeled;
    };
    auto valid = [&](int k) { return k >= 0 || k == kDivergedMin; };

    std::vector<Vector> midpoints;
    dec.mesh.for_each_edge([&](Index i, Index j, int) {
        if (!dec.active[i] || !dec.active[j]) return;
        const int ki = key(i);
        const int kj = key(j);
        if (!valid(ki) || !valid(kj) || ki == kj) return;
        midpoints.push_back(
            0.5 * (dec.mesh.nodes().row(i) + dec.mesh.nodes().row(j)).transpose());
    });
    Matrix out(static_cast<Index>(midpoints.size()), dec.mesh.dim());
    for (std::size_t r = 0; r < midpoints.size(); ++r) {
        out.row(static_cast<Index>(r)) = midpoints[r].transpose();
    }
    return out;
}

//! Hausdorff distance between two point sets (rows), by exhaustive pairs.
inline double hausdorff(const Matrix& a, const Matrix& b) {
    if (a.rows() == 0 || b.rows() == 0) {
        throw InvalidArgumentError("hausdorff: empty point set");
    }
    if (a.cols() != b.cols()) throw InvalidArgumentError("hausdorff: dimension mismatch");
    auto one_sided = [](const Matrix& p, const Matrix& q) {
        double worst = 0.0;
        for (Index i = 0; i < p.rows(); ++i) {
            double nearest = std::numeric_limits<double>::infinity();
            for (Index j = 0; j < q.rows(); ++j) {
                nearest = std::min(nearest, (p.row(i) - q.row(j)).squaredNorm());
            }
            worst = std::max(worst, nearest);
        }
        return std::sqrt(worst);
    };
    return std::max(one_sided(a, b), one_sided(b, a));
}

} // namespace msinfer
