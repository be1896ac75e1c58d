#pragma once

#include "errors.hpp"
#include "field.hpp"
#include "types.hpp"

#include <cmath>
#include <optional>
#include <sstream>
#include <utility>

namespace msinfer {

enum class KernelFamily { gaussian };

//! Smoothing kernel K; Gaussian only for now.
struct KernelSpec {
    KernelFamily family = KernelFamily::gaussian;
    int dim = 1;

    KernelSpec() = default;
    KernelSpec(KernelFamily family_, int dim_) : family(family_), dim(dim_) {
        if (dim < 1) throw InvalidArgumentError("KernelSpec: dimension must be positive");
    }

    //! Normalizing constant (2*pi)^(-d/2).
    double norm_const() const { return std::pow(2.0 * M_PI, -0.5 * dim); }

    //! K(u) = (2*pi)^(-d/2) exp(-|u|^2 / 2).
    double value(const Vector& u) const {
        if (!u.allFinite()) throw InvalidArgumentError("kernel value: non-finite input");
        if (u.size() != dim) throw InvalidArgumentError("kernel value: dimension mismatch");
        return norm_const() * std::exp(-0.5 * u.squaredNorm());
    }
};

inline double kernel_value(const KernelSpec& spec, const Vector& u) { return spec.value(u); }

//! n x d data matrix with an optional response vector.
struct Sample {
    Matrix points;
    std::optional<Vector> response;

    Sample() = default;
    explicit Sample(Matrix pts, std::optional<Vector> resp = std::nullopt)
        : points(std::move(pts)), response(std::move(resp)) {
        if (points.rows() < 1) throw InvalidArgumentError("Sample: need at least one point");
        if (!points.allFinite()) throw InvalidArgumentError("Sample: non-finite entries");
        if (response) {
            if (response->size() != points.rows()) {
                throw InvalidArgumentError("Sample: response length != number of points");
            }
            if (!response->allFinite()) throw InvalidArgumentError("Sample: non-finite response");
        }
    }

    Index size() const { return points.rows(); }
    int dim() const { return static_cast<int>(points.cols()); }
    bool has_response() const { return response.has_value(); }
};

//! Per-coordinate affine transform z = (x - mean) / scale.
//
// Scales are population standard deviations (1/n normalization), so a
// uniformly duplicated sample standardizes to exactly the same transform.
struct Standardizer {
    Vector mean;
    Vector scale;

    static Standardizer fit(const Matrix& points) {
        const Index n = points.rows();
        if (n < 1) throw InvalidArgumentError("Standardizer: empty data");
        Standardizer s;
        s.mean = points.colwise().mean().transpose();
        s.scale.resize(points.cols());
        for (Index j = 0; j < points.cols(); ++j) {
            const double var = (points.col(j).array() - s.mean(j)).square().sum() /
                               static_cast<double>(n);
            if (!(var > 0.0)) {
                std::ostringstream msg;
                msg << "degenerate coordinate " << j << ": zero variance";
                throw DegenerateCoordinateError(msg.str(), static_cast<int>(j));
            }
            s.scale(j) = std::sqrt(var);
        }
        return s;
    }

    //! Identity transform (mean 0, scale 1) in d dimensions.
    static Standardizer identity(int d) {
        Standardizer s;
        s.mean = Vector::Zero(d);
        s.scale = Vector::Ones(d);
        return s;
    }

    Vector apply(const Vector& x) const {
        return ((x - mean).array() / scale.array()).matrix();
    }
    Matrix apply(const Matrix& pts) const {
        return (pts.rowwise() - mean.transpose()).array().rowwise() /
               scale.transpose().array();
    }
    Vector invert(const Vector& z) const {
        return (z.array() * scale.array()).matrix() + mean;
    }
    Matrix invert(const Matrix& zs) const {
        return (zs.array().rowwise() * scale.transpose().array()).matrix().rowwise() +
               mean.transpose();
    }
};

//! Silverman's rule of thumb, h = (4 / ((d+2) n))^(1/(d+4)).
//
// The returned bandwidth is meant for data standardized per coordinate;
// the per-coordinate standard deviations are folded in by the standardizer,
// so the effective bandwidth along coordinate j is h * scale(j).
inline double silverman_bandwidth(const Sample& sample) {
    if (sample.size() < 2) throw InvalidArgumentError("silverman_bandwidth: need n >= 2");
    Standardizer::fit(sample.points); // rejects degenerate coordinates
    const double d = static_cast<double>(sample.dim());
    const double n = static_cast<double>(sample.size());
    return std::pow(4.0 / ((d + 2.0) * n), 1.0 / (d + 4.0));
}

//! Kernel density estimator with analytic gradient and exact mean shift step.
class KdeField final : public ScalarField {
public:
    KdeField(Matrix points, double h)
        : pts_(std::move(points)),
          h_(h),
          spec_(KernelFamily::gaussian, static_cast<int>(pts_.cols())) {
        if (!(h > 0.0)) throw InvalidArgumentError("KdeField: bandwidth must be positive");
        if (pts_.rows() < 1) throw InvalidArgumentError("KdeField: empty sample");
        if (!pts_.allFinite()) throw InvalidArgumentError("KdeField: non-finite sample");
        norm_ = spec_.norm_const() / (static_cast<double>(pts_.rows()) * std::pow(h_, dim()));
    }

    KdeField(const Sample& sample, double h) : KdeField(sample.points, h) {}

    int dim() const override { return spec_.dim; }
    double bandwidth() const { return h_; }
    const Matrix& points() const { return pts_; }

    //! (1 / (n h^d)) sum_i K((x - X_i) / h)
    double value(const Vector& x) const override {
        return norm_ * weights(x).sum();
    }

    //! -(1 / (n h^(d+2))) sum_i K((x - X_i) / h) (x - X_i)
    Vector gradient(const Vector& x) const override {
        const Eigen::ArrayXd w = weights(x);
        Vector g = pts_.transpose() * w.matrix();
        g -= w.sum() * x;
        return g * (norm_ / (h_ * h_));
    }

    //! Mean shift update sum_i w_i X_i / sum_i w_i; nullopt if the weights underflow.
    std::optional<Vector> mean_shift_step(const Vector& x) const override {
        const Eigen::ArrayXd w = weights(x);
        const double total = w.sum();
        if (!(total > 0.0)) return std::nullopt;
        return Vector(pts_.transpose() * w.matrix() / total);
    }

private:
    //! Unnormalized weights exp(-|x - X_i|^2 / (2h^2)) for all i.
    Eigen::ArrayXd weights(const Vector& x) const {
        if (!x.allFinite()) throw InvalidArgumentError("KdeField: non-finite query");
        if (x.size() != pts_.cols()) throw InvalidArgumentError("KdeField: dimension mismatch");
        return ((pts_.rowwise() - x.transpose()).rowwise().squaredNorm().array() *
                (-0.5 / (h_ * h_)))
            .exp();
    }

    Matrix pts_;
    double h_;
    KernelSpec spec_;
    double norm_;
};

//! Nadaraya-Watson kernel regression with analytic gradient.
class KernelRegressionField final : public ScalarField {
public:
    // Queries where the total kernel weight falls below this floor raise
    // FarFromDataError instead of returning 0/0.
    static constexpr double kWeightFloor = 1e-300;

    KernelRegressionField(Matrix points, Vector response, double h)
        : pts_(std::move(points)), y_(std::move(response)), h_(h) {
        if (!(h > 0.0)) {
            throw InvalidArgumentError("KernelRegressionField: bandwidth must be positive");
        }
        if (pts_.rows() < 1 || y_.size() != pts_.rows()) {
            throw InvalidArgumentError("KernelRegressionField: bad sample/response");
        }
        if (!pts_.allFinite() || !y_.allFinite()) {
            throw InvalidArgumentError("KernelRegressionField: non-finite data");
        }
    }

    KernelRegressionField(const Sample& sample, double h)
        : KernelRegressionField(sample.points,
                                sample.response ? *sample.response
                                                : throw InvalidArgumentError(
                                                      "KernelRegressionField: sample has no response"),
                                h) {}

    int dim() const override { return static_cast<int>(pts_.cols()); }
    double bandwidth() const { return h_; }
    const Matrix& points() const { return pts_; }
    const Vector& response() const { return y_; }

    //! sum_i Y_i K((x - X_i)/h) / sum_i K((x - X_i)/h)
    double value(const Vector& x) const override {
        const Eigen::ArrayXd w = checked_weights(x);
        return (w * y_.array()).sum() / w.sum();
    }

    //! Quotient rule over the weighted sums.
    Vector gradient(const Vector& x) const override {
        const Eigen::ArrayXd w = checked_weights(x);
        const double den = w.sum();
        const double num = (w * y_.array()).sum();
        // d w_i / dx = -w_i (x - X_i) / h^2
        const Vector dden = (pts_.transpose() * w.matrix() - den * x) / (h_ * h_);
        const Vector dnum =
            (pts_.transpose() * (w * y_.array()).matrix() - num * x) / (h_ * h_);
        return (dnum * den - num * dden) / (den * den);
    }

private:
    Eigen::ArrayXd checked_weights(const Vector& x) const {
        if (!x.allFinite()) {
            throw InvalidArgumentError("KernelRegressionField: non-finite query");
        }
        if (x.size() != pts_.cols()) {
            throw InvalidArgumentError("KernelRegressionField: dimension mismatch");
        }
        const Eigen::ArrayXd sq = (pts_.rowwise() - x.transpose()).rowwise().squaredNorm();
        const Eigen::ArrayXd w = (sq * (-0.5 / (h_ * h_))).exp();
        if (!(w.sum() > kWeightFloor)) {
            throw FarFromDataError("kernel regression query too far from data",
                                   std::sqrt(sq.minCoeff()));
        }
        return w;
    }

    Matrix pts_;
    Vector y_;
    double h_;
};

inline double kde_value(const KdeField& f, const Vector& x) { return f.value(x); }
inline Vector kde_gradient(const KdeField& f, const Vector& x) { return f.gradient(x); }
inline double kernel_regression_value(const KernelRegressionField& f, const Vector& x) {
    return f.value(x);
}

} // namespace msinfer
