#pragma once

// Quantizing functions tau: presets, empirical admissibility probing, the
// dual tau*(z) = z + tau(-z), Taylor data, and Newton inversion of the maps
// tau_x : y -> x + tau(y - x).

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tauquant/expr.hpp"
#include "tauquant/poly.hpp"
#include "tauquant/sampling.hpp"
#include "tauquant/vars.hpp"

namespace tauq {

struct QuantizingFunction {
    int dim = 1;
    std::vector<SymbolExpr> components;  // in w-variables, canonical names
    bool is_polynomial = false;
    // declared admissibility order mu; nullopt means declared
    // "bounded derivatives" (the mu = 0 regime)
    std::optional<double> declared_order;
    std::string name = "custom";

    std::vector<double> operator()(std::span<const double> w) const {
        VariableBinding b;
        auto wn = w_names(dim);
        for (int i = 0; i < dim; ++i) b[wn[i]] = w[i];
        std::vector<double> out(dim);
        for (int i = 0; i < dim; ++i) out[i] = components[i].eval(b);
        return out;
    }

    std::string components_text() const {
        std::string s;
        for (int i = 0; i < dim; ++i) {
            if (i) s += ", ";
            s += components[i].to_string();
        }
        return s;
    }
};

namespace detail {

inline std::map<std::string, int> w_axes(int dim) {
    std::map<std::string, int> axes;
    auto wn = w_names(dim);
    for (int i = 0; i < dim; ++i) axes[wn[i]] = i;
    return axes;
}

inline std::optional<std::vector<MultiPoly>> tau_polynomials(const QuantizingFunction& tau) {
    auto axes = w_axes(tau.dim);
    std::vector<MultiPoly> polys;
    for (const auto& c : tau.components) {
        auto p = MultiPoly::from_expr(c, axes, tau.dim);
        if (!p) return std::nullopt;
        polys.push_back(std::move(*p));
    }
    return polys;
}

}  // namespace detail

// Builds a quantizing function from components, canonicalizing variable names
// and enforcing tau(0) = 0.
inline QuantizingFunction make_quantizing_function(std::vector<SymbolExpr> components,
                                                   std::string name = "custom",
                                                   std::optional<double> declared_order = {}) {
    QuantizingFunction tau;
    tau.dim = static_cast<int>(components.size());
    if (tau.dim < 1) throw ValidationError("quantizing function needs at least one component");
    tau.components.reserve(tau.dim);
    for (auto& c : components) tau.components.push_back(canonicalize_names(c, tau.dim));
    tau.name = std::move(name);
    tau.declared_order = declared_order;

    VariableBinding zero;
    for (const auto& n : w_names(tau.dim)) zero[n] = 0.0;
    for (const auto& c : tau.components) {
        double v = c.eval(zero);
        if (std::abs(v) > 1e-12)
            throw ValidationError("quantizing function must vanish at 0, got tau(0) component " +
                                  std::to_string(v));
    }
    tau.is_polynomial = detail::tau_polynomials(tau).has_value();
    return tau;
}

enum class TauPreset { Kn, Akn, Weyl };

inline QuantizingFunction make_preset(TauPreset preset, int dim) {
    std::vector<SymbolExpr> comps;
    auto wn = w_names(dim);
    for (int i = 0; i < dim; ++i) {
        SymbolExpr w = SymbolExpr::variable(wn[i]);
        switch (preset) {
            case TauPreset::Kn: comps.push_back(SymbolExpr::constant(0.0)); break;
            case TauPreset::Akn: comps.push_back(w); break;
            case TauPreset::Weyl: comps.push_back(w / SymbolExpr::constant(2.0)); break;
        }
    }
    const char* name = preset == TauPreset::Kn ? "kn" : preset == TauPreset::Akn ? "akn" : "weyl";
    return make_quantizing_function(std::move(comps), name, 0.0);
}

inline QuantizingFunction make_linear(double s, int dim) {
    std::vector<SymbolExpr> comps;
    for (const auto& n : w_names(dim))
        comps.push_back(SymbolExpr::constant(s) * SymbolExpr::variable(n));
    return make_quantizing_function(std::move(comps), "linear:" + detail::format_double(s), 0.0);
}

// CLI-facing: "kn" | "akn" | "weyl" | "linear:<s>" | comma-separated
// component expressions in w-variables.
inline QuantizingFunction parse_tau_spec(const std::string& spec, int dim) {
    if (spec == "kn") return make_preset(TauPreset::Kn, dim);
    if (spec == "akn") return make_preset(TauPreset::Akn, dim);
    if (spec == "weyl") return make_preset(TauPreset::Weyl, dim);
    if (spec.rfind("linear:", 0) == 0) {
        try {
            return make_linear(std::stod(spec.substr(7)), dim);
        } catch (const std::exception&) {
            throw ValidationError("bad linear tau spec: " + spec);
        }
    }
    std::vector<SymbolExpr> comps;
    std::size_t start = 0;
    int depth = 0;
    for (std::size_t i = 0; i <= spec.size(); ++i) {
        if (i < spec.size() && spec[i] == '(') ++depth;
        if (i < spec.size() && spec[i] == ')') --depth;
        if (i == spec.size() || (spec[i] == ',' && depth == 0)) {
            comps.push_back(parse_expression(spec.substr(start, i - start)));
            start = i + 1;
        }
    }
    if (static_cast<int>(comps.size()) != dim)
        throw ValidationError("tau spec has " + std::to_string(comps.size()) +
                              " components, expected " + std::to_string(dim));
    return make_quantizing_function(std::move(comps));
}

// tau*(z) = z + tau(-z); same admissibility order as tau.
inline QuantizingFunction dual(const QuantizingFunction& tau) {
    auto wn = w_names(tau.dim);
    std::map<std::string, SymbolExpr> negate;
    for (const auto& n : wn) negate.emplace(n, -SymbolExpr::variable(n));
    std::vector<SymbolExpr> comps;
    for (int i = 0; i < tau.dim; ++i)
        comps.push_back(SymbolExpr::variable(wn[i]) + tau.components[i].substitute(negate));
    std::string name = tau.name == "kn"    ? "akn"
                       : tau.name == "akn" ? "kn"
                       : tau.name == "weyl" ? "weyl"
                                            : "dual(" + tau.name + ")";
    return make_quantizing_function(std::move(comps), std::move(name), tau.declared_order);
}

// ---------------------------------------------------------------------------
// Admissibility probing
// ---------------------------------------------------------------------------

struct AdmissibilityReport {
    double tau0_residual = 0.0;
    double mu_hat = 0.0;       // least half-integer in {0,...,4} fitting the bound
    bool mu_fit_ok = true;     // false when even mu = 4 does not fit
    bool bounded_derivatives = false;
    bool hadamard_ok = false;
    double min_jacobian = 0.0;
    double box_halfwidth = 0.0;
    int samples = 0;
};

namespace detail {

// iterated symbolic derivatives d^alpha tau_i, |alpha| <= max_order
struct TauDerivatives {
    std::vector<MultiIndex> indices;                       // |alpha| >= 1
    std::vector<std::vector<SymbolExpr>> exprs;            // [index][component]
    std::vector<std::vector<CompiledExpr>> compiled;       // same layout
};

inline TauDerivatives tau_derivatives(const QuantizingFunction& tau, int max_order) {
    TauDerivatives d;
    auto wn = w_names(tau.dim);
    auto slots = make_slots({wn});
    std::map<std::vector<int>, std::vector<SymbolExpr>> cache;
    cache[std::vector<int>(tau.dim, 0)] = tau.components;
    for (const auto& mi : multi_indices_up_to(tau.dim, max_order)) {
        if (mi.order() == 0) continue;
        // differentiate from the predecessor along the first nonzero axis
        std::vector<int> prev = mi.e;
        int axis = 0;
        while (prev[axis] == 0) ++axis;
        --prev[axis];
        const auto& base = cache.at(prev);
        std::vector<SymbolExpr> cur;
        cur.reserve(tau.dim);
        for (const auto& c : base) cur.push_back(c.diff(wn[axis]));
        cache[mi.e] = cur;
        d.indices.push_back(mi);
        std::vector<CompiledExpr> comp;
        for (const auto& c : cur) comp.push_back(CompiledExpr::compile(c, slots));
        d.exprs.push_back(std::move(cur));
        d.compiled.push_back(std::move(comp));
    }
    return d;
}

inline double inf_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace detail

inline AdmissibilityReport check_admissible(const QuantizingFunction& tau, double box_halfwidth,
                                            int samples) {
    if (samples < 100) throw ValidationError("check_admissible needs at least 100 samples");
    if (box_halfwidth <= 0) throw ValidationError("box halfwidth must be positive");
    const int n = tau.dim;
    AdmissibilityReport rep;
    rep.box_halfwidth = box_halfwidth;
    rep.samples = samples;

    std::vector<double> zero(n, 0.0);
    double t0 = detail::inf_norm(tau(zero));
    rep.tau0_residual = t0;

    // deterministic sample set: origin, axis points, then quasi-random fill
    std::vector<std::vector<double>> pts;
    pts.push_back(zero);
    for (int i = 0; i < n; ++i)
        for (double s : {box_halfwidth, -box_halfwidth, box_halfwidth / 2, -box_halfwidth / 2}) {
            auto p = zero;
            p[i] = s;
            pts.push_back(p);
        }
    QuasiRandomSequence seq(n);
    while (static_cast<int>(pts.size()) < samples)
        pts.push_back(seq.point_in_box(pts.size(), box_halfwidth));
    // separate unit-ball set for the reference constants
    std::vector<std::vector<double>> unit_pts;
    for (int i = 0; i < std::max(64, samples / 8); ++i) unit_pts.push_back(seq.point_in_box(i, 1.0));

    auto derivs = detail::tau_derivatives(tau, 4);

    // per derivative index: reference sup on the unit ball and box samples
    const double floor_eps = 1e-9;
    std::vector<double> fitted_mu_per_index(derivs.indices.size(), 0.0);
    bool fit_all = true;
    bool bounded = true;
    for (std::size_t di = 0; di < derivs.indices.size(); ++di) {
        for (int comp = 0; comp < n; ++comp) {
            const auto& ce = derivs.compiled[di][comp];
            double ref = 0.0;
            for (const auto& p : unit_pts) ref = std::max(ref, std::abs(ce.eval(p)));
            double allowed = 10.0 * ref + floor_eps;
            double mu_needed = 0.0;
            double sup_inner = 0.0, sup_shell = 0.0;
            for (const auto& p : pts) {
                double v = std::abs(ce.eval(p));
                double nx2 = 0.0;
                for (double c : p) nx2 += c * c;
                double jap = std::sqrt(1.0 + nx2);
                // least h on the half-integer grid with |d tau| <= allowed * <x>^h
                double h = 0.0;
                while (h <= 4.0 && v > allowed * std::pow(jap, h)) h += 0.5;
                mu_needed = std::max(mu_needed, h);
                if (detail::inf_norm(p) <= box_halfwidth / 2)
                    sup_inner = std::max(sup_inner, v);
                else
                    sup_shell = std::max(sup_shell, v);
            }
            if (mu_needed > 4.0) {
                fit_all = false;
                mu_needed = 4.0;
            }
            fitted_mu_per_index[di] = std::max(fitted_mu_per_index[di], mu_needed);
            if (sup_shell > std::max(1.1 * sup_inner, sup_inner + floor_eps)) bounded = false;
        }
    }
    rep.mu_hat = *std::max_element(fitted_mu_per_index.begin(), fitted_mu_per_index.end());
    rep.mu_fit_ok = fit_all;
    rep.bounded_derivatives = bounded;

    // Hadamard probe: Jacobian never (numerically) vanishing + |tau| growth
    auto wn = w_names(n);
    auto slots = make_slots({wn});
    std::vector<std::vector<CompiledExpr>> jac(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            jac[i].push_back(CompiledExpr::compile(tau.components[i].diff(wn[j]), slots));
    double min_det = std::numeric_limits<double>::infinity();
    for (const auto& p : pts) {
        Eigen::MatrixXd J(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) J(i, j) = jac[i][j].eval(p);
        min_det = std::min(min_det, std::abs(J.determinant()));
    }
    rep.min_jacobian = min_det;

    double min_tau_outer = std::numeric_limits<double>::infinity();
    double min_tau_mid = std::numeric_limits<double>::infinity();
    for (const auto& p : pts) {
        double r = detail::inf_norm(p);
        double tv = detail::inf_norm(tau(p));
        if (r >= 0.9 * box_halfwidth) min_tau_outer = std::min(min_tau_outer, tv);
        if (r >= 0.4 * box_halfwidth && r <= 0.6 * box_halfwidth)
            min_tau_mid = std::min(min_tau_mid, tv);
    }
    bool growth = min_tau_outer > min_tau_mid * (1.0 + 1e-9) && min_tau_outer > floor_eps;
    rep.hadamard_ok = min_det > 1e-12 && growth;
    return rep;
}

// ---------------------------------------------------------------------------
// Taylor data
// ---------------------------------------------------------------------------

struct TaylorCoefficient {
    MultiIndex gamma;                            // 1 <= |gamma| <= N-1
    std::vector<double> value;                   // per component
    std::optional<std::vector<Rational>> exact;  // set when tau is polynomial
};

struct TaylorRemainderCoefficient {
    MultiIndex gamma;             // |gamma| = N
    std::vector<SymbolExpr> c;    // per component, in w-variables
};

struct TaylorData {
    int order = 1;  // N
    int dim = 1;
    std::vector<TaylorCoefficient> coefficients;
    std::vector<TaylorRemainderCoefficient> remainder;

    std::vector<double> reconstruct(std::span<const double> w) const {
        std::vector<double> out(dim, 0.0);
        VariableBinding b;
        auto wn = w_names(dim);
        for (int i = 0; i < dim; ++i) b[wn[i]] = w[i];
        auto wpow = [&](const MultiIndex& g) {
            double m = 1.0;
            for (int i = 0; i < dim; ++i) m *= detail::powi(w[i], g[i]);
            return m;
        };
        for (const auto& c : coefficients) {
            double m = wpow(c.gamma);
            for (int i = 0; i < dim; ++i) out[i] += c.value[i] * m;
        }
        for (const auto& r : remainder) {
            double m = wpow(r.gamma);
            for (int i = 0; i < dim; ++i) out[i] += r.c[i].eval(b) * m;
        }
        return out;
    }
};

// Greedy split of a monomial exponent into (delta, rest) with |delta| = cap.
inline std::pair<std::vector<int>, std::vector<int>> split_exponent(const std::vector<int>& e,
                                                                    int cap) {
    std::vector<int> delta(e.size(), 0), rest = e;
    int budget = cap;
    for (std::size_t i = 0; i < e.size() && budget > 0; ++i) {
        int take = std::min(e[i], budget);
        delta[i] = take;
        rest[i] -= take;
        budget -= take;
    }
    return {delta, rest};
}

inline TaylorData taylor(const QuantizingFunction& tau, int order_N) {
    if (order_N < 1) throw ValidationError("taylor order must be >= 1");
    const int n = tau.dim;
    TaylorData td;
    td.order = order_N;
    td.dim = n;
    auto wn = w_names(n);

    auto polys = detail::tau_polynomials(tau);
    if (polys) {
        // exact rational coefficients; remainder terms stay polynomial
        for (int ord = 1; ord <= order_N - 1; ++ord)
            for (const auto& gamma : multi_indices_of_order(n, ord)) {
                TaylorCoefficient tc;
                tc.gamma = gamma;
                tc.exact = std::vector<Rational>();
                for (int i = 0; i < n; ++i) {
                    Rational c = (*polys)[i].coefficient(gamma);
                    tc.exact->push_back(c);
                    tc.value.push_back(c.to_double());
                }
                td.coefficients.push_back(std::move(tc));
            }
        // group remaining monomials as c_gamma(w) w^gamma with |gamma| = N
        std::map<std::vector<int>, std::vector<MultiPoly>> rem;
        for (const auto& gamma : multi_indices_of_order(n, order_N))
            rem[gamma.e] = std::vector<MultiPoly>(n, MultiPoly(n));
        for (int i = 0; i < n; ++i)
            for (const auto& [e, c] : (*polys)[i].terms()) {
                int deg = std::accumulate(e.begin(), e.end(), 0);
                if (deg < order_N) continue;
                auto [delta, rest] = split_exponent(e, order_N);
                rem[delta][i].add_term(rest, c);
            }
        for (auto& [e, comps] : rem) {
            TaylorRemainderCoefficient rc;
            rc.gamma.e = e;
            for (int i = 0; i < n; ++i) rc.c.push_back(comps[i].to_expr(wn));
            td.remainder.push_back(std::move(rc));
        }
        return td;
    }

    // smooth path: derivatives at 0 and Gauss-quadrature remainder functions
    auto derivs = detail::tau_derivatives(tau, order_N);
    VariableBinding zero;
    for (const auto& name : wn) zero[name] = 0.0;
    for (std::size_t di = 0; di < derivs.indices.size(); ++di) {
        const auto& gamma = derivs.indices[di];
        if (gamma.order() <= order_N - 1) {
            TaylorCoefficient tc;
            tc.gamma = gamma;
            double fact = static_cast<double>(gamma.factorial());
            for (int i = 0; i < n; ++i) tc.value.push_back(derivs.exprs[di][i].eval(zero) / fact);
            td.coefficients.push_back(std::move(tc));
        } else if (gamma.order() == order_N) {
            // c_gamma(w) = (N/gamma!) * Int_0^1 (1-t)^(N-1) [d^gamma tau](t w) dt
            TaylorRemainderCoefficient rc;
            rc.gamma = gamma;
            auto rule = gauss_legendre_01(24);
            double scale = static_cast<double>(order_N) / static_cast<double>(gamma.factorial());
            for (int i = 0; i < n; ++i) {
                SymbolExpr acc = SymbolExpr::constant(0.0);
                for (std::size_t g = 0; g < rule.nodes.size(); ++g) {
                    double t = rule.nodes[g];
                    double wgt = rule.weights[g] * std::pow(1.0 - t, order_N - 1);
                    std::map<std::string, SymbolExpr> shrink;
                    for (const auto& name : wn)
                        shrink.emplace(name,
                                       SymbolExpr::constant(t) * SymbolExpr::variable(name));
                    acc = acc + SymbolExpr::constant(wgt) * derivs.exprs[di][i].substitute(shrink);
                }
                rc.c.push_back(SymbolExpr::constant(scale) * acc);
            }
            td.remainder.push_back(std::move(rc));
        }
    }
    return td;
}

// ---------------------------------------------------------------------------
// Inversion of tau_x : y -> x + tau(y - x) by damped Newton iteration
// ---------------------------------------------------------------------------

inline std::vector<double> invert_tau_x(const QuantizingFunction& tau,
                                        std::span<const double> x, std::span<const double> w,
                                        double tol) {
    if (tol <= 0) throw ValidationError("tolerance must be positive");
    const int n = tau.dim;
    if (static_cast<int>(x.size()) != n || static_cast<int>(w.size()) != n)
        throw ValidationError("point dimension mismatch");
    auto wn = w_names(n);
    auto slots = make_slots({wn});
    std::vector<CompiledExpr> comps;
    std::vector<std::vector<CompiledExpr>> jac(n);
    for (int i = 0; i < n; ++i) {
        comps.push_back(CompiledExpr::compile(tau.components[i], slots));
        for (int j = 0; j < n; ++j)
            jac[i].push_back(CompiledExpr::compile(tau.components[i].diff(wn[j]), slots));
    }

    auto residual = [&](const Eigen::VectorXd& y, Eigen::VectorXd& F) {
        std::vector<double> d(n);
        for (int i = 0; i < n; ++i) d[i] = y(i) - x[i];
        for (int i = 0; i < n; ++i) F(i) = x[i] + comps[i].eval(d) - w[i];
    };

    Eigen::VectorXd y(n), F(n), Ftrial(n);
    for (int i = 0; i < n; ++i) y(i) = w[i];  // identity-plus-offset start
    residual(y, F);
    const double min_step = std::ldexp(1.0, -20);
    for (int it = 0; it < 100; ++it) {
        if (F.lpNorm<Eigen::Infinity>() <= tol) {
            std::vector<double> out(n);
            for (int i = 0; i < n; ++i) out[i] = y(i);
            return out;
        }
        std::vector<double> d(n);
        for (int i = 0; i < n; ++i) d[i] = y(i) - x[i];
        Eigen::MatrixXd J(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) J(i, j) = jac[i][j].eval(d);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
        if (!lu.isInvertible()) throw NumericalError("singular Jacobian in invert_tau_x");
        Eigen::VectorXd step = lu.solve(-F);
        double s = 1.0;
        for (;;) {
            Eigen::VectorXd ytrial = y + s * step;
            residual(ytrial, Ftrial);
            if (Ftrial.norm() < F.norm()) {
                y = ytrial;
                F = Ftrial;
                break;
            }
            s *= 0.5;
            if (s < min_step) throw NumericalError("invert_tau_x: step shrank below 2^-20");
        }
    }
    if (F.lpNorm<Eigen::Infinity>() <= tol) {
        std::vector<double> out(n);
        for (int i = 0; i < n; ++i) out[i] = y(i);
        return out;
    }
    throw NumericalError("invert_tau_x: no convergence after 100 iterations");
}

// Jacobian of tau at a point, from symbolic first derivatives.
inline Eigen::MatrixXd tau_jacobian(const QuantizingFunction& tau, std::span<const double> w) {
    const int n = tau.dim;
    auto wn = w_names(n);
    auto slots = make_slots({wn});
    Eigen::MatrixXd J(n, n);
    std::vector<double> p(w.begin(), w.end());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            J(i, j) = CompiledExpr::compile(tau.components[i].diff(wn[j]), slots).eval(p);
    return J;
}

}  // namespace tauq
