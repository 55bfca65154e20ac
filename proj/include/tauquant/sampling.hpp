#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "tauquant/errors.hpp"

namespace tauq {

// Low-discrepancy R2-type sequence (Roberts' generalized golden ratio).
// Deterministic: point(i) depends only on i and the dimension.
class QuasiRandomSequence {
public:
    explicit QuasiRandomSequence(int dim) : dim_(dim), alpha_(dim) {
        if (dim < 1 || dim > 16) throw ValidationError("quasi-random dimension out of range");
        // phi_d solves x^(d+1) = x + 1
        double phi = 2.0;
        for (int it = 0; it < 64; ++it) phi = std::pow(1.0 + phi, 1.0 / (dim + 1));
        double a = 1.0;
        for (int d = 0; d < dim; ++d) {
            a /= phi;
            alpha_[d] = a;
        }
    }

    // i-th point of the unit cube [0,1)^dim
    std::vector<double> point(std::uint64_t i) const {
        std::vector<double> p(dim_);
        for (int d = 0; d < dim_; ++d) {
            double v = 0.5 + alpha_[d] * static_cast<double>(i + 1);
            p[d] = v - std::floor(v);
        }
        return p;
    }

    // i-th point scaled to the centered box [-half,half]^dim
    std::vector<double> point_in_box(std::uint64_t i, double half) const {
        auto p = point(i);
        for (double& v : p) v = (2.0 * v - 1.0) * half;
        return p;
    }

    int dim() const { return dim_; }

private:
    int dim_;
    std::vector<double> alpha_;
};

// Seeded rng with a portable uniform mapping (no std distributions, whose
// output is implementation-defined).
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : eng_(seed) {}

    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // inclusive bounds
    long long uniform_int(long long lo, long long hi) {
        return lo + static_cast<long long>(uniform01() * static_cast<double>(hi - lo + 1));
    }

private:
    std::mt19937_64 eng_;
};

// Gauss-Legendre nodes/weights on [0,1], by Newton iteration on P_m.
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

inline GaussRule gauss_legendre_01(int m) {
    if (m < 1 || m > 64) throw ValidationError("gauss order out of range");
    GaussRule r;
    r.nodes.resize(m);
    r.weights.resize(m);
    for (int i = 0; i < m; ++i) {
        // initial guess on [-1,1]
        double x = std::cos(M_PI * (i + 0.75) / (m + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= m; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = m * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        r.nodes[m - 1 - i] = 0.5 * (x + 1.0);
        r.weights[m - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);  // already halved for [0,1]
    }
    return r;
}

}  // namespace tauq
