#pragma once

// Periodic grids, the discrete Fourier convention of the library, quadrature
// weights, discrete Sobolev norms, and the GridFunction CSV format.
//
// Conventions (n = dim, N = points per axis, L = half length):
//   x_j = -L + j dx,          dx  = 2L/N
//   xi_q = (pi/L) (q - N/2),  dxi = pi/L      (so dx*dxi*N = 2pi)
//   dft:  u^(xi_q) = dx^n sum_j e^{-i x_j xi_q} u(x_j)
//   idft: u(x_j)   = (2pi)^{-n} dxi^n sum_q e^{+i x_j xi_q} u^(xi_q)

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "tauquant/errors.hpp"

namespace tauq {

using Complex = std::complex<double>;

class Grid {
public:
    Grid(int dim, int points_per_axis, double half_length)
        : dim_(dim), n_(points_per_axis), L_(half_length) {
        if (dim < 1 || dim > 2) throw ValidationError("grid dimension must be 1 or 2");
        if (n_ < 8 || n_ % 2 != 0) throw ValidationError("points per axis must be even and >= 8");
        if (L_ <= 0) throw ValidationError("half length must be positive");
    }

    int dim() const { return dim_; }
    int points_per_axis() const { return n_; }
    double half_length() const { return L_; }
    double dx() const { return 2.0 * L_ / n_; }
    double dxi() const { return M_PI / L_; }
    double max_frequency() const { return dxi() * (n_ / 2); }

    // total number of nodes N^n
    int size() const {
        int s = 1;
        for (int d = 0; d < dim_; ++d) s *= n_;
        return s;
    }

    double node(int axis_index) const { return -L_ + axis_index * dx(); }
    double frequency(int axis_index) const { return dxi() * (axis_index - n_ / 2); }

    // row-major flattening over axes
    void decode(int flat, int* idx) const {
        for (int d = dim_ - 1; d >= 0; --d) {
            idx[d] = flat % n_;
            flat /= n_;
        }
    }

    void node_point(int flat, double* out) const {
        int idx[2];
        decode(flat, idx);
        for (int d = 0; d < dim_; ++d) out[d] = node(idx[d]);
    }

    void frequency_point(int flat, double* out) const {
        int idx[2];
        decode(flat, idx);
        for (int d = 0; d < dim_; ++d) out[d] = frequency(idx[d]);
    }

    // minimal-image representative of a coordinate difference; odd on the
    // node lattice (ties at |w| = L keep the sign of w)
    double wrap_difference(double w) const { return std::remainder(w, 2.0 * L_); }

    bool operator==(const Grid& o) const {
        return dim_ == o.dim_ && n_ == o.n_ && L_ == o.L_;
    }

private:
    int dim_;
    int n_;
    double L_;
};

struct GridFunction {
    Grid grid;
    std::vector<Complex> values;  // size N^n, row-major

    explicit GridFunction(const Grid& g) : grid(g), values(g.size(), Complex(0.0, 0.0)) {}
    GridFunction(const Grid& g, std::vector<Complex> v) : grid(g), values(std::move(v)) {
        if (static_cast<int>(values.size()) != g.size())
            throw ValidationError("grid function size mismatch");
    }
};

namespace detail {

// one-axis transform: out[q] = sum_j factor(q,j) in[j], applied along each axis
template <typename Factor>
inline std::vector<Complex> axis_transform(const Grid& g, const std::vector<Complex>& in,
                                           Factor factor) {
    const int n = g.points_per_axis();
    std::vector<Complex> cur = in;
    std::vector<Complex> mat(n * n);
    for (int q = 0; q < n; ++q)
        for (int j = 0; j < n; ++j) mat[q * n + j] = factor(q, j);
    for (int axis = 0; axis < g.dim(); ++axis) {
        std::vector<Complex> next(cur.size(), Complex(0, 0));
        // stride pattern for row-major flattening
        int stride = 1;
        for (int d = axis + 1; d < g.dim(); ++d) stride *= n;
        int outer = static_cast<int>(cur.size()) / (n * stride);
        for (int o = 0; o < outer; ++o)
            for (int s = 0; s < stride; ++s) {
                const int base = o * n * stride + s;
                for (int q = 0; q < n; ++q) {
                    Complex acc(0, 0);
                    for (int j = 0; j < n; ++j) acc += mat[q * n + j] * cur[base + j * stride];
                    next[base + q * stride] = acc;
                }
            }
        cur = std::move(next);
    }
    return cur;
}

}  // namespace detail

inline GridFunction dft(const GridFunction& u) {
    const Grid& g = u.grid;
    auto vals = detail::axis_transform(g, u.values, [&](int q, int j) {
        return std::polar(g.dx(), -g.node(j) * g.frequency(q));
    });
    return GridFunction(g, std::move(vals));
}

inline GridFunction idft(const GridFunction& uhat) {
    const Grid& g = uhat.grid;
    const double scale = g.dxi() / (2.0 * M_PI);
    auto vals = detail::axis_transform(g, uhat.values, [&](int j, int q) {
        return std::polar(scale, g.node(j) * g.frequency(q));
    });
    return GridFunction(g, std::move(vals));
}

// ||u||_{H^s} = ((2pi)^{-n} dxi^n sum_q <xi_q>^{2s} |u^(xi_q)|^2)^{1/2}
inline double sobolev_norm(const GridFunction& u, double s) {
    const Grid& g = u.grid;
    GridFunction uhat = dft(u);
    double acc = 0.0;
    double pt[2];
    for (int q = 0; q < g.size(); ++q) {
        g.frequency_point(q, pt);
        double xi2 = 0.0;
        for (int d = 0; d < g.dim(); ++d) xi2 += pt[d] * pt[d];
        acc += std::pow(1.0 + xi2, s) * std::norm(uhat.values[q]);
    }
    double weight = 1.0;
    for (int d = 0; d < g.dim(); ++d) weight *= g.dxi() / (2.0 * M_PI);
    return std::sqrt(weight * acc);
}

inline double l2_norm(const GridFunction& u) { return sobolev_norm(u, 0.0); }

// --- CSV format: header "# grid n=<n> N=<N> L=<L>", then "re,im" per node ---

inline void write_grid_function_csv(const std::string& path, const GridFunction& u) {
    std::ofstream f(path);
    if (!f) throw ValidationError("cannot open for writing: " + path);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "# grid n=%d N=%d L=%.17g\n", u.grid.dim(),
                  u.grid.points_per_axis(), u.grid.half_length());
    f << buf;
    for (const Complex& v : u.values) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", v.real(), v.imag());
        f << buf;
    }
    if (!f) throw ValidationError("write failed: " + path);
}

inline GridFunction read_grid_function_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot open for reading: " + path);
    std::string header;
    std::getline(f, header);
    int n = 0, N = 0;
    double L = 0.0;
    if (std::sscanf(header.c_str(), "# grid n=%d N=%d L=%lf", &n, &N, &L) != 3)
        throw ValidationError("bad grid function header in " + path);
    Grid g(n, N, L);
    std::vector<Complex> vals;
    vals.reserve(g.size());
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        double re = 0, im = 0;
        if (std::sscanf(line.c_str(), "%lf,%lf", &re, &im) != 2)
            throw ValidationError("bad grid function row in " + path);
        vals.emplace_back(re, im);
    }
    return GridFunction(g, std::move(vals));
}

}  // namespace tauq
