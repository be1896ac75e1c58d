#pragma once

#include "complex.hpp"
#include "errors.hpp"
#include "flow.hpp"
#include "kernel.hpp"
#include "mesh.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "types.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace msinfer {

struct MsrCell {
    double intercept = 0.0;
    Vector slope;
    Index n_points = 0;
    bool fallback = false; // intercept-only (fewer than d + 2 points)
    bool ridged = false;   // normal matrix was singular; ridge jitter applied
};

//! Morse-Smale regression: per-cell OLS over the d-cells of a kernel
//! regression pilot. Covariates are standardized internally; coefficients
//! are reported in the original coordinates.
class MsrModel {
public:
    ComplexDecomposition decomposition; // of the pilot, in standardized space
    Standardizer standardizer;
    std::vector<MsrCell> cells;
    std::vector<int> point_cells; // training-point -> cell
    double h = 0.0;
    double global_mean = 0.0;

    int n_cells() const { return static_cast<int>(cells.size()); }

    //! Cell of a query point (nearest labeled mesh node), or -1.
    int cell_for(const Vector& x) const {
        return cell_of_standardized(standardizer.apply(x));
    }

    //! mu_cell + beta_cell . x for x's cell.
    double predict(const Vector& x) const {
        const Vector z = standardizer.apply(x);
        if (!decomposition.mesh.box().contains(z)) {
            const Vector clamped = detail::clamp_to(decomposition.mesh.box(), z);
            throw ExtrapolationError("msr_predict: query outside the domain box",
                                     cell_of_standardized(clamped));
        }
        const int cell = cell_of_standardized(z);
        if (cell < 0) return global_mean;
        return cells[cell].intercept + cells[cell].slope.dot(x);
    }

private:
    int cell_of_standardized(const Vector& z) const {
        const int cell = decomposition.cell_at(z);
        if (cell >= 0) return cell;
        // nearest node carries no cell: fall back to the nearest celled node
        int best = -1;
        double best_dist = std::numeric_limits<double>::infinity();
        for (Index i = 0; i < decomposition.mesh.size(); ++i) {
            if (decomposition.cell_of[i] < 0) continue;
            const double dist =
                (decomposition.mesh.nodes().row(i).transpose() - z).squaredNorm();
            if (dist < best_dist) {
                best_dist = dist;
                best = static_cast<int>(i);
            }
        }
        return best < 0 ? -1 : decomposition.cell_of[best];
    }
};

inline MsrModel fit_msr(const Sample& sample, double h,
                        const MeshConfig& mesh_cfg = MeshConfig{},
                        const FlowConfig* flow_cfg = nullptr) {
    if (!sample.has_response()) throw InvalidArgumentError("fit_msr: sample has no response");
    if (!(h > 0.0)) throw InvalidArgumentError("fit_msr: h must be positive");
    const Index n = sample.size();
    const int d = sample.dim();
    if (n < d + 2) throw InvalidArgumentError("fit_msr: need n >= d + 2");

    MsrModel model;
    model.h = h;
    model.standardizer = Standardizer::fit(sample.points);
    const Matrix z = model.standardizer.apply(sample.points);
    const Vector& y = *sample.response;
    model.global_mean = y.mean();

    const KernelRegressionField pilot(z, y, h);
    const Box box = Box::bounding(z).inflated(3.0 * h);
    FlowConfig cfg = flow_cfg ? *flow_cfg : FlowConfig::for_scale(h, box);
    cfg.box = box;
    // the pilot lives on a compact domain: extrema may sit on the boundary
    cfg.boundary = BoundaryPolicy::clamp;

    DecomposeOptions opts;
    opts.floor_frac = 0.0; // no density floor for a regression surface
    model.decomposition = decompose(pilot, mesh_cfg.build(z, box), cfg, opts);

    const int n_cells = model.decomposition.n_cells();
    model.point_cells.assign(n, -1);
    for (Index i = 0; i < n; ++i) {
        model.point_cells[i] = model.decomposition.cell_at(z.row(i).transpose());
    }

    model.cells.assign(n_cells, MsrCell{});
    std::vector<std::vector<Index>> members(n_cells);
    for (Index i = 0; i < n; ++i) {
        if (model.point_cells[i] >= 0) members[model.point_cells[i]].push_back(i);
    }

    parallel_for(static_cast<std::size_t>(n_cells), [&](std::size_t c) {
        MsrCell& cell = model.cells[c];
        const auto& rows = members[c];
        cell.n_points = static_cast<Index>(rows.size());
        cell.slope = Vector::Zero(d);
        if (rows.empty()) {
            cell.intercept = model.global_mean;
            cell.fallback = true;
            return;
        }
        if (cell.n_points < d + 2) {
            double mean = 0.0;
            for (Index i : rows) mean += y(i);
            cell.intercept = mean / static_cast<double>(rows.size());
            cell.fallback = true;
            return;
        }
        Matrix design(cell.n_points, d + 1);
        Vector response(cell.n_points);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            design(static_cast<Index>(r), 0) = 1.0;
            design.row(static_cast<Index>(r)).tail(d) = sample.points.row(rows[r]);
            response(static_cast<Index>(r)) = y(rows[r]);
        }
        Matrix normal = design.transpose() * design;
        const Vector rhs = design.transpose() * response;
        if (Eigen::ColPivHouseholderQR<Matrix>(design).rank() < d + 1) {
            normal += (1e-10 * normal.trace() / d) * Matrix::Identity(d + 1, d + 1);
            cell.ridged = true;
        }
        const Vector coef = normal.ldlt().solve(rhs);
        cell.intercept = coef(0);
        cell.slope = coef.tail(d);
    });
    return model;
}

inline double msr_predict(const MsrModel& model, const Vector& x) {
    return model.predict(x);
}

//! k-fold cross-validated bandwidth for the full fit_msr pipeline. Folds are
//! dealt over the lexicographic order of the rows, then shuffled with the
//! seed, so the choice is invariant to the input row order. Ties break
//! toward the larger bandwidth.
inline double msr_cv_bandwidth(const Sample& sample, std::vector<double> candidates,
                               int folds, std::uint64_t seed,
                               const MeshConfig& mesh_cfg = MeshConfig{}) {
    if (candidates.size() < 2) {
        throw InvalidArgumentError("msr_cv_bandwidth: need at least 2 candidates");
    }
    if (folds < 2) throw InvalidArgumentError("msr_cv_bandwidth: need folds >= 2");
    if (!sample.has_response()) {
        throw InvalidArgumentError("msr_cv_bandwidth: sample has no response");
    }
    const Index n = sample.size();
    const Vector& y = *sample.response;

    // canonical row order: lexicographic over (covariates, response)
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
        for (Index j = 0; j < sample.points.cols(); ++j) {
            if (sample.points(a, j) < sample.points(b, j)) return true;
            if (sample.points(a, j) > sample.points(b, j)) return false;
        }
        return y(a) < y(b);
    });
    Rng rng = derive_rng(seed, stream::folds);
    rng.shuffle(order);
    std::vector<int> fold_of(n);
    for (Index r = 0; r < n; ++r) fold_of[order[r]] = static_cast<int>(r % folds);

    std::sort(candidates.begin(), candidates.end());
    double best_h = candidates.front();
    double best_err = std::numeric_limits<double>::infinity();
    for (const double h : candidates) {
        double err = 0.0;
        for (int f = 0; f < folds; ++f) {
            std::vector<Index> train_rows, test_rows;
            for (Index i = 0; i < n; ++i) {
                (fold_of[i] == f ? test_rows : train_rows).push_back(i);
            }
            Matrix train_x(static_cast<Index>(train_rows.size()), sample.dim());
            Vector train_y(static_cast<Index>(train_rows.size()));
            for (std::size_t r = 0; r < train_rows.size(); ++r) {
                train_x.row(static_cast<Index>(r)) = sample.points.row(train_rows[r]);
                train_y(static_cast<Index>(r)) = y(train_rows[r]);
            }
            const double train_mean = train_y.mean();
            double fold_err = 0.0;
            try {
                const MsrModel model = fit_msr(Sample(train_x, train_y), h, mesh_cfg);
                for (Index i : test_rows) {
                    double pred;
                    try {
                        pred = model.predict(sample.points.row(i).transpose());
                    } catch (const ExtrapolationError&) {
                        pred = train_mean;
                    }
                    fold_err += (y(i) - pred) * (y(i) - pred);
                }
            } catch (const NumericalError&) {
                for (Index i : test_rows) {
                    fold_err += (y(i) - train_mean) * (y(i) - train_mean);
                }
            }
            err += fold_err;
        }
        // ties (up to rounding noise) go to the larger h via the ascending scan
        if (err <= best_err + 1e-9 * std::max(1.0, best_err)) {
            best_err = std::min(err, best_err);
            best_h = h;
        }
    }
    return best_h;
}

} // namespace msinfer
