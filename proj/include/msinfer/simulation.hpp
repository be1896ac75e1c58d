#pragma once

#include "errors.hpp"
#include "field.hpp"
#include "kernel.hpp"
#include "rng.hpp"
#include "types.hpp"

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace msinfer {

//! Isotropic Gaussian mixture.
struct MixtureSpec {
    struct Component {
        Vector mean;
        double sigma;
        double weight;
    };
    std::vector<Component> components;

    MixtureSpec() = default;
    explicit MixtureSpec(std::vector<Component> comps) : components(std::move(comps)) {
        if (components.empty()) throw InvalidArgumentError("MixtureSpec: no components");
        double total = 0.0;
        const Index d = components.front().mean.size();
        for (const auto& c : components) {
            if (c.mean.size() != d) {
                throw InvalidArgumentError("MixtureSpec: mixed dimensions");
            }
            if (!(c.sigma > 0.0)) throw InvalidArgumentError("MixtureSpec: sigma <= 0");
            if (!(c.weight > 0.0)) throw InvalidArgumentError("MixtureSpec: weight <= 0");
            total += c.weight;
        }
        if (std::abs(total - 1.0) > 1e-12) {
            throw InvalidArgumentError("MixtureSpec: weights must sum to 1");
        }
    }

    int dim() const { return static_cast<int>(components.front().mean.size()); }

    //! Same mixture with one component's sigma replaced.
    MixtureSpec with_sigma(std::size_t index, double sigma) const {
        MixtureSpec out = *this;
        if (index >= components.size()) {
            throw InvalidArgumentError("MixtureSpec: component index out of range");
        }
        out.components[index].sigma = sigma;
        return out;
    }
};

//! The mixture's population density as an evaluable field.
class MixtureField final : public ScalarField {
public:
    explicit MixtureField(MixtureSpec spec) : spec_(std::move(spec)) {}

    int dim() const override { return spec_.dim(); }

    double value(const Vector& x) const override {
        double total = 0.0;
        for (const auto& c : spec_.components) {
            total += c.weight * component_density(c, x);
        }
        return total;
    }

    Vector gradient(const Vector& x) const override {
        Vector g = Vector::Zero(x.size());
        for (const auto& c : spec_.components) {
            g -= c.weight * component_density(c, x) / (c.sigma * c.sigma) * (x - c.mean);
        }
        return g;
    }

private:
    static double component_density(const MixtureSpec::Component& c, const Vector& x) {
        const double d = static_cast<double>(x.size());
        return std::pow(2.0 * M_PI * c.sigma * c.sigma, -0.5 * d) *
               std::exp(-0.5 * (x - c.mean).squaredNorm() / (c.sigma * c.sigma));
    }

    MixtureSpec spec_;
};

//! Seeded mixture draw: pick a component by cumulative weight, then add
//! isotropic Gaussian noise. Fully reproducible from (seed).
inline Sample sample_mixture(const MixtureSpec& spec, Index n, std::uint64_t seed) {
    if (n < 1) throw InvalidArgumentError("sample_mixture: n >= 1 required");
    Rng rng = derive_rng(seed, stream::mixture);
    const int d = spec.dim();
    Matrix pts(n, d);
    for (Index i = 0; i < n; ++i) {
        const double u = rng.uniform01();
        double cum = 0.0;
        const MixtureSpec::Component* chosen = &spec.components.back();
        for (const auto& c : spec.components) {
            cum += c.weight;
            if (u < cum) {
                chosen = &c;
                break;
            }
        }
        for (int j = 0; j < d; ++j) {
            pts(i, j) = chosen->mean(j) + chosen->sigma * rng.normal();
        }
    }
    return Sample(std::move(pts));
}

//! Mirror two-Gaussian mixture: means at (+-separation/2, 0, ...), equal
//! weights; its mode-clustering boundary is the bisector plane x_1 = 0.
inline MixtureSpec mirror_mixture(int d, double separation, double sigma) {
    Vector m1 = Vector::Zero(d), m2 = Vector::Zero(d);
    m1(0) = -separation / 2.0;
    m2(0) = separation / 2.0;
    return MixtureSpec({{m1, sigma, 0.5}, {m2, sigma, 0.5}});
}

//! Four-component 2-D mixture with weights (0.2, 0.5, 0.2, 0.1) and a
//! common sigma; the component means sit on the unit square's corners.
inline MixtureSpec four_component_mixture(double sigma = 0.2) {
    auto mean = [](double a, double b) {
        Vector v(2);
        v << a, b;
        return v;
    };
    return MixtureSpec({{mean(0.0, 0.0), sigma, 0.2},
                        {mean(1.0, 0.0), sigma, 0.5},
                        {mean(0.0, 1.0), sigma, 0.2},
                        {mean(1.0, 1.0), sigma, 0.1}});
}

} // namespace msinfer
