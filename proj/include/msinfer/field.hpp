#pragma once

#include "errors.hpp"
#include "types.hpp"

#include <optional>

namespace msinfer {

//! Axis-aligned box; the working domain for flows and meshes.
struct Box {
    Vector lo;
    Vector hi;

    Box() = default;
    Box(Vector lo_, Vector hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
        if (lo.size() != hi.size() || (hi.array() < lo.array()).any()) {
            throw InvalidArgumentError("Box: lo/hi mismatch");
        }
    }

    int dim() const { return static_cast<int>(lo.size()); }

    bool contains(const Vector& x) const {
        return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
    }

    double volume() const { return (hi - lo).prod(); }

    Box inflated(double margin) const {
        return Box(lo.array() - margin, hi.array() + margin);
    }

    static Box bounding(const Matrix& points) {
        if (points.rows() == 0) throw InvalidArgumentError("Box::bounding: empty point set");
        return Box(points.colwise().minCoeff().transpose(),
                   points.colwise().maxCoeff().transpose());
    }
};

//! An evaluable smooth function with value and (analytic) gradient queries.
//
// Fields are immutable after construction; value/gradient calls are safe
// from multiple threads.
class ScalarField {
public:
    virtual ~ScalarField() = default;

    virtual int dim() const = 0;
    virtual double value(const Vector& x) const = 0;
    virtual Vector gradient(const Vector& x) const = 0;

    // Exact fixed-point ascent update when the field admits one (the mean
    // shift update of a Gaussian KDE); nullopt means the caller should take
    // plain gradient steps.
    virtual std::optional<Vector> mean_shift_step(const Vector& x) const {
        (void)x;
        return std::nullopt;
    }
};

} // namespace msinfer
