#pragma once

#include "errors.hpp"
#include "field.hpp"
#include "kernel.hpp"
#include "parallel.hpp"
#include "types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

namespace msinfer {

//! What happens at the edge of the working box: report a sentinel, or
//! project iterates back onto the box (flows on a compact domain).
enum class BoundaryPolicy { sentinel, clamp };

struct FlowConfig {
    double step_size = 1.0; // initial gradient step, as a multiple of length_scale
    double tolerance = 1e-7;
    int max_iters = 5000;
    double merge_radius = 0.5;
    double length_scale = 1.0;
    Box box;
    BoundaryPolicy boundary = BoundaryPolicy::sentinel;

    // Descent iterates whose floor-field value drops below descent_floor are
    // declared Diverged (low-density regions flow to infinity). The floor is
    // checked on descent_floor_field when set, otherwise on the flowed field.
    double descent_floor = -std::numeric_limits<double>::infinity();
    const ScalarField* descent_floor_field = nullptr;

    void validate() const {
        if (!(step_size > 0.0)) throw InvalidArgumentError("FlowConfig: step_size <= 0");
        if (!(tolerance > 0.0)) throw InvalidArgumentError("FlowConfig: tolerance <= 0");
        if (max_iters < 1) throw InvalidArgumentError("FlowConfig: max_iters < 1");
        if (!(tolerance < merge_radius)) {
            throw InvalidArgumentError("FlowConfig: tolerance must be < merge_radius");
        }
        if (box.lo.size() == 0) throw InvalidArgumentError("FlowConfig: box not set");
    }

    //! Scale-aware defaults tied to the smoothing scale h.
    static FlowConfig for_scale(double h, Box box) {
        FlowConfig cfg;
        cfg.tolerance = 1e-7 * h;
        cfg.merge_radius = 0.5 * h;
        cfg.length_scale = h;
        cfg.box = std::move(box);
        return cfg;
    }

    //! Defaults for a KDE: box = data bounding box inflated by 3h per side.
    static FlowConfig for_kde(const KdeField& f) {
        return for_scale(f.bandwidth(),
                         Box::bounding(f.points()).inflated(3.0 * f.bandwidth()));
    }
};

enum class FlowOutcome { converged, max_iters, left_domain, diverged };

struct FlowResult {
    FlowOutcome outcome = FlowOutcome::max_iters;
    Vector destination;
    int iterations = 0;
    double grad_norm = std::numeric_limits<double>::quiet_NaN();

    bool converged() const { return outcome == FlowOutcome::converged; }
};

struct CriticalPoint {
    Vector location;
    double value;
};

//! Known critical points a bulk-labeling flow may stop at early.
struct SnapTargets {
    const std::vector<CriticalPoint>* points = nullptr;
    double radius = 0.0;

    int hit(const Vector& x) const {
        if (!points) return -1;
        for (std::size_t t = 0; t < points->size(); ++t) {
            if (((*points)[t].location - x).norm() <= radius) return static_cast<int>(t);
        }
        return -1;
    }
};

//! Local modes and minima, deduplicated at merge_radius.
struct CriticalSet {
    std::vector<CriticalPoint> modes;
    std::vector<CriticalPoint> minima;
    double merge_radius = 0.0;

    //! Index of the mode within `radius` of x, or -1.
    int nearest_mode(const Vector& x, double radius) const {
        return nearest(modes, x, radius);
    }
    int nearest_min(const Vector& x, double radius) const {
        return nearest(minima, x, radius);
    }

private:
    static int nearest(const std::vector<CriticalPoint>& pts, const Vector& x,
                       double radius) {
        int best = -1;
        double best_dist = radius;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double dist = (pts[i].location - x).norm();
            if (dist <= best_dist) {
                best_dist = dist;
                best = static_cast<int>(i);
            }
        }
        return best;
    }
};

namespace detail {

inline bool lex_less(const Vector& a, const Vector& b) {
    for (Index j = 0; j < a.size(); ++j) {
        if (a(j) < b(j)) return true;
        if (a(j) > b(j)) return false;
    }
    return false;
}

inline Vector clamp_to(const Box& box, Vector x) {
    for (Index j = 0; j < x.size(); ++j) x(j) = std::clamp(x(j), box.lo(j), box.hi(j));
    return x;
}

struct MergedCriticals {
    std::vector<CriticalPoint> reps; // canonical order
    std::vector<int> assignment;     // input index -> rep index
};

//! Single-linkage clustering at `radius`; representative is the max-value
//! member (take_max) or the min-value member; ties broken lexicographically.
//! Output order is canonical: by value (descending for modes, ascending for
//! minima), then lexicographic location.
inline MergedCriticals merge_with_assignment(const std::vector<CriticalPoint>& pts,
                                             double radius, bool take_max) {
    const std::size_t k = pts.size();
    std::vector<std::size_t> parent(k);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            if ((pts[i].location - pts[j].location).norm() <= radius) {
                parent[find(i)] = find(j);
            }
        }
    }
    std::vector<CriticalPoint> reps;
    std::vector<int> cluster_of(k, -1);
    std::vector<int> rep_of_root(k, -1);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t root = find(i);
        if (rep_of_root[root] < 0) {
            rep_of_root[root] = static_cast<int>(reps.size());
            reps.push_back(pts[i]);
        } else {
            CriticalPoint& cur = reps[rep_of_root[root]];
            const bool better =
                take_max ? pts[i].value > cur.value : pts[i].value < cur.value;
            const bool tie =
                pts[i].value == cur.value && lex_less(pts[i].location, cur.location);
            if (better || tie) cur = pts[i];
        }
        cluster_of[i] = rep_of_root[root];
    }
    std::vector<int> order(reps.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (reps[a].value != reps[b].value) {
            return take_max ? reps[a].value > reps[b].value
                            : reps[a].value < reps[b].value;
        }
        return lex_less(reps[a].location, reps[b].location);
    });
    std::vector<int> rank(reps.size());
    for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = static_cast<int>(r);
    MergedCriticals out;
    out.reps.resize(reps.size());
    for (std::size_t r = 0; r < order.size(); ++r) out.reps[r] = reps[order[r]];
    out.assignment.resize(k);
    for (std::size_t i = 0; i < k; ++i) out.assignment[i] = rank[cluster_of[i]];
    return out;
}

inline std::vector<CriticalPoint> merge_critical_points(std::vector<CriticalPoint> pts,
                                                        double radius, bool take_max) {
    return merge_with_assignment(pts, radius, take_max).reps;
}

//! Strictly improving axis probe around a stationary iterate. Saddles admit
//! an improving axis direction at these scales; genuine extrema do not, so
//! flows cannot terminate on a saddle's stable manifold.
inline std::optional<std::pair<Vector, double>> axis_escape(const ScalarField& field,
                                                            const Vector& x, double fx,
                                                            bool ascending,
                                                            const FlowConfig& cfg) {
    const double scales[2] = {0.02 * cfg.length_scale, 10.0 * cfg.tolerance};
    for (double s : scales) {
        for (Index j = 0; j < x.size(); ++j) {
            for (double sign : {1.0, -1.0}) {
                Vector trial = x;
                trial(j) += sign * s;
                if (cfg.boundary == BoundaryPolicy::clamp) trial = clamp_to(cfg.box, trial);
                double ft;
                try {
                    ft = field.value(trial);
                } catch (const NumericalError&) {
                    continue;
                }
                if (ascending ? ft > fx : ft < fx) return std::make_pair(trial, ft);
            }
        }
    }
    return std::nullopt;
}

} // namespace detail

//! Gradient ascent flow toward the destination map. KDE fields iterate the
//! exact mean shift update; other fields take backtracked normalized
//! gradient steps, so the value is non-decreasing along accepted steps.
//
// `trajectory` (optional) collects accepted iterates including the start.
// `snap`/`snapped_id` (optional) stop the flow once an iterate enters the
// snap ball of a known mode, for bulk labeling against a fixed critical set.
inline FlowResult ascend(const ScalarField& field, Vector x, const FlowConfig& cfg,
                         std::vector<Vector>* trajectory = nullptr,
                         const SnapTargets* snap = nullptr, int* snapped_id = nullptr) {
    cfg.validate();
    if (!cfg.box.contains(x)) throw InvalidArgumentError("ascend: start outside domain box");
    if (trajectory) trajectory->push_back(x);
    if (snapped_id) *snapped_id = -1;
    if (snap && snapped_id) {
        if (int t = snap->hit(x); t >= 0) {
            *snapped_id = t;
            return {FlowOutcome::converged, (*snap->points)[t].location, 0, 0.0};
        }
    }

    double fx = 0.0;
    bool fx_known = false;
    auto ensure_fx = [&] {
        if (!fx_known) {
            fx = field.value(x);
            fx_known = true;
        }
    };

    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        Vector next;
        double fnext = 0.0;
        bool fnext_known = false;
        bool have_next = false;
        if (auto ms = field.mean_shift_step(x)) {
            next = std::move(*ms);
            have_next = true;
        } else {
            ensure_fx();
            const Vector g = field.gradient(x);
            const double gnorm = g.norm();
            if (gnorm > 0.0) {
                const Vector dir = g / gnorm;
                double step = cfg.step_size * cfg.length_scale;
                const double step_min = 0.25 * cfg.tolerance;
                while (step >= step_min) {
                    Vector trial = x + step * dir;
                    if (cfg.boundary == BoundaryPolicy::clamp) {
                        trial = detail::clamp_to(cfg.box, trial);
                    }
                    bool evaluable = true;
                    double ftrial = 0.0;
                    try {
                        ftrial = field.value(trial);
                    } catch (const NumericalError&) {
                        evaluable = false;
                    }
                    if (evaluable && ftrial > fx) {
                        next = std::move(trial);
                        fnext = ftrial;
                        fnext_known = true;
                        have_next = true;
                        break;
                    }
                    step *= 0.5;
                }
            }
            if (!have_next) {
                // stationary at this resolution: a saddle still has an
                // improving axis direction, a maximum does not
                if (auto esc = detail::axis_escape(field, x, fx, true, cfg)) {
                    next = esc->first;
                    fnext = esc->second;
                    fnext_known = true;
                    have_next = true;
                } else {
                    return {FlowOutcome::converged, x, iter, gnorm};
                }
            }
        }
        if (cfg.boundary == BoundaryPolicy::sentinel && !cfg.box.contains(next)) {
            return {FlowOutcome::left_domain, next, iter};
        }
        const double displacement = (next - x).norm();
        x = std::move(next);
        fx = fnext;
        fx_known = fnext_known;
        if (trajectory) trajectory->push_back(x);
        if (snap && snapped_id) {
            if (int t = snap->hit(x); t >= 0) {
                *snapped_id = t;
                return {FlowOutcome::converged, (*snap->points)[t].location, iter, 0.0};
            }
        }
        if (displacement < cfg.tolerance) {
            ensure_fx();
            if (auto esc = detail::axis_escape(field, x, fx, true, cfg)) {
                x = esc->first;
                fx = esc->second;
                fx_known = true;
                if (trajectory) trajectory->push_back(x);
                continue;
            }
            return {FlowOutcome::converged, x, iter, field.gradient(x).norm()};
        }
    }
    return {FlowOutcome::max_iters, x, cfg.max_iters};
}

//! Gradient descent flow. Iterates whose floor-field value drops below
//! cfg.descent_floor, or that exit the box, return Diverged.
inline FlowResult descend(const ScalarField& field, Vector x, const FlowConfig& cfg,
                          std::vector<Vector>* trajectory = nullptr,
                          const SnapTargets* snap = nullptr, int* snapped_id = nullptr) {
    cfg.validate();
    if (!cfg.box.contains(x)) throw InvalidArgumentError("descend: start outside domain box");
    if (trajectory) trajectory->push_back(x);
    if (snapped_id) *snapped_id = -1;
    if (snap && snapped_id) {
        if (int t = snap->hit(x); t >= 0) {
            *snapped_id = t;
            return {FlowOutcome::converged, (*snap->points)[t].location, 0, 0.0};
        }
    }

    const ScalarField* floor_field =
        cfg.descent_floor_field ? cfg.descent_floor_field : &field;
    const bool has_floor = std::isfinite(cfg.descent_floor);

    double fx = field.value(x);
    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        const Vector g = field.gradient(x);
        const double gnorm = g.norm();
        Vector next;
        double fnext = fx;
        bool improved = false;
        bool fell_off = false;
        if (gnorm > 0.0) {
            const Vector dir = -g / gnorm;
            double step = cfg.step_size * cfg.length_scale;
            const double step_min = 0.25 * cfg.tolerance;
            while (step >= step_min) {
                Vector trial = x + step * dir;
                if (cfg.boundary == BoundaryPolicy::clamp) {
                    trial = detail::clamp_to(cfg.box, trial);
                }
                bool evaluable = true;
                double ftrial = 0.0;
                try {
                    ftrial = field.value(trial);
                } catch (const NumericalError&) {
                    evaluable = false;
                    fell_off = true; // heading out of the evaluable region
                }
                if (evaluable && ftrial < fx) {
                    next = std::move(trial);
                    fnext = ftrial;
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
        }
        if (!improved) {
            if (fell_off) return {FlowOutcome::diverged, x, iter};
            if (auto esc = detail::axis_escape(field, x, fx, false, cfg)) {
                next = esc->first;
                fnext = esc->second;
            } else {
                return {FlowOutcome::converged, x, iter, gnorm};
            }
        }
        if (cfg.boundary == BoundaryPolicy::sentinel && !cfg.box.contains(next)) {
            return {FlowOutcome::diverged, next, iter};
        }
        if (has_floor) {
            const double mask = floor_field == &field ? fnext : floor_field->value(next);
            if (mask < cfg.descent_floor) return {FlowOutcome::diverged, next, iter};
        }
        const double displacement = (next - x).norm();
        x = std::move(next);
        fx = fnext;
        if (trajectory) trajectory->push_back(x);
        if (snap && snapped_id) {
            if (int t = snap->hit(x); t >= 0) {
                *snapped_id = t;
                return {FlowOutcome::converged, (*snap->points)[t].location, iter, 0.0};
            }
        }
        if (displacement < cfg.tolerance) {
            if (auto esc = detail::axis_escape(field, x, fx, false, cfg)) {
                x = esc->first;
                fx = esc->second;
                if (trajectory) trajectory->push_back(x);
                continue;
            }
            return {FlowOutcome::converged, x, iter, field.gradient(x).norm()};
        }
    }
    return {FlowOutcome::max_iters, x, cfg.max_iters};
}

//! Ascend/descend from every seed, then cluster converged destinations with
//! single linkage at merge_radius. Mode representatives take the highest
//! field value, minimum representatives the lowest.
inline CriticalSet find_critical_set(const ScalarField& field, const Matrix& seeds,
                                     const FlowConfig& cfg) {
    cfg.validate();
    if (seeds.rows() == 0) throw InvalidArgumentError("find_critical_set: no seeds");

    const Index n = seeds.rows();
    std::vector<FlowResult> ups(n), downs(n);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        const Vector x = seeds.row(static_cast<Index>(i)).transpose();
        ups[i] = ascend(field, x, cfg);
        downs[i] = descend(field, x, cfg);
    });

    std::vector<CriticalPoint> mode_cands, min_cands;
    for (Index i = 0; i < n; ++i) {
        if (ups[i].converged()) {
            mode_cands.push_back({ups[i].destination, field.value(ups[i].destination)});
        }
        if (downs[i].converged()) {
            min_cands.push_back({downs[i].destination, field.value(downs[i].destination)});
        }
    }
    if (mode_cands.empty() && min_cands.empty()) {
        throw NumericalError("find_critical_set: no flow converged (empty critical set)");
    }

    CriticalSet out;
    out.merge_radius = cfg.merge_radius;
    out.modes = detail::merge_critical_points(std::move(mode_cands), cfg.merge_radius, true);
    out.minima =
        detail::merge_critical_points(std::move(min_cands), cfg.merge_radius, false);
    return out;
}

} // namespace msinfer
