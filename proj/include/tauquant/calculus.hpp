#pragma once

// Expansion machinery: amplitude reduction, exact polynomial factor
// expansions, the amplitude -> tau-symbol expansion, quantization changes,
// adjoint/transpose, composition, the elliptic parametrix recursion, and the
// leading-order change of variables.
//
// Term layout for the amplitude -> tau-symbol expansion (w = x - y):
//   T_{a,b}(x,y,xi) = (1/a!b!) [dx^a dy^b A](v,v,xi)|_{v=x+tau(y-x)}
//                     * [-tau(-w)]^a [-w - tau(-w)]^b,
// and, for polynomial tau, the closed regrouping
//   [-tau(-w)]^a [-w - tau(-w)]^b = sum_delta E_delta(w) w^delta,
// which after integration by parts in xi pairs w^delta with i^{|delta|}
// d_xi^delta. Both routes assemble to the same operator on band-interior
// amplitudes; the pre-IBP route is the exact Taylor identity.

#include <complex>
#include <optional>
#include <utility>

#include "tauquant/estimates.hpp"
#include "tauquant/multi_index.hpp"
#include "tauquant/poly.hpp"
#include "tauquant/quantize.hpp"

namespace tauq {

// ---------------------------------------------------------------------------
// Amplitude reduction: a_k = (1 - Lap_xi)^Nred a / (1 + |x-y|^2)^Nred
// ---------------------------------------------------------------------------

inline ComplexSymbol reduce_amplitude(const ComplexSymbol& amplitude, int dim, int n_red) {
    if (n_red < 1) throw ValidationError("reduction order must be >= 1");
    constexpr std::size_t kNodeGuard = 1000000;
    ComplexSymbol a = amplitude.canonicalized(dim);
    auto ks = k_names(dim);
    for (int pass = 0; pass < n_red; ++pass) {
        ComplexSymbol lap;
        for (const auto& k : ks) lap = lap + a.diff(k).diff(k);
        a = a + ComplexSymbol(-lap.re, -lap.im);
        if (a.node_count() > kNodeGuard) throw NumericalError("reduced amplitude grew too large");
    }
    auto xs = x_names(dim);
    auto ys = y_names(dim);
    SymbolExpr dist2 = SymbolExpr::constant(1.0);
    for (int i = 0; i < dim; ++i) {
        SymbolExpr d = SymbolExpr::variable(xs[i]) - SymbolExpr::variable(ys[i]);
        dist2 = dist2 + SymbolExpr::pow(d, 2.0);
    }
    SymbolExpr denom = n_red == 1 ? dist2 : SymbolExpr::pow(dist2, static_cast<double>(n_red));
    return {a.re / denom, a.im / denom};
}

// ---------------------------------------------------------------------------
// Exact factor expansion (for polynomial tau):
//   [tau(w)]^alpha [w - tau(w)]^beta = sum_delta E_delta(tau, w) w^delta
// with |alpha|+|beta| <= |delta| <= N (|alpha|+|beta|) and E_delta constant
// below the top order; E_0 = 1 for alpha = beta = 0.
// ---------------------------------------------------------------------------

struct FactorTerm {
    MultiIndex delta;
    MultiPoly coefficient;  // constant unless |delta| = N(|alpha|+|beta|)
};

namespace detail {

inline std::vector<FactorTerm> regroup_powers(const MultiPoly& product, int min_order, int cap) {
    std::map<std::vector<int>, MultiPoly> grouped;
    const int dim = product.dim();
    for (const auto& [e, c] : product.terms()) {
        int deg = std::accumulate(e.begin(), e.end(), 0);
        if (deg < min_order)
            throw NumericalError("factor expansion: monomial below the guaranteed vanishing order");
        if (deg < cap || deg == 0) {
            auto it = grouped.find(e);
            if (it == grouped.end()) it = grouped.emplace(e, MultiPoly(dim)).first;
            it->second.add_term(std::vector<int>(dim, 0), c);
        } else {
            auto [delta, rest] = split_exponent(e, cap);
            auto it = grouped.find(delta);
            if (it == grouped.end()) it = grouped.emplace(delta, MultiPoly(dim)).first;
            it->second.add_term(rest, c);
        }
    }
    std::vector<FactorTerm> out;
    for (auto& [e, poly] : grouped) {
        FactorTerm t;
        t.delta.e = e;
        t.coefficient = std::move(poly);
        out.push_back(std::move(t));
    }
    return out;
}

// product [tau(w)]^alpha [w - tau(w)]^beta as an exact polynomial
inline MultiPoly factor_product(const std::vector<MultiPoly>& tau_polys, const MultiIndex& alpha,
                                const MultiIndex& beta) {
    const int dim = static_cast<int>(tau_polys.size());
    MultiPoly p = MultiPoly::constant(dim, Rational(1));
    for (int i = 0; i < dim; ++i) {
        if (alpha[i] > 0) p = p * tau_polys[i].pow(alpha[i]);
        if (beta[i] > 0) {
            MultiPoly lin = MultiPoly::monomial(dim, i) - tau_polys[i];
            p = p * lin.pow(beta[i]);
        }
    }
    return p;
}

}  // namespace detail

inline std::vector<FactorTerm> factor_expansion(const QuantizingFunction& tau,
                                                const MultiIndex& alpha, const MultiIndex& beta,
                                                int taylor_N) {
    if (alpha.order() + beta.order() > 8)
        throw ValidationError("factor_expansion: |alpha|+|beta| must be <= 8");
    if (taylor_N < 1) throw ValidationError("factor_expansion: N must be >= 1");
    auto polys = detail::tau_polynomials(tau);
    if (!polys) throw ValidationError("factor_expansion requires a polynomial tau");
    if (alpha.dim() != tau.dim || beta.dim() != tau.dim)
        throw ValidationError("factor_expansion: index dimension mismatch");
    MultiPoly product = detail::factor_product(*polys, alpha, beta);
    int total = alpha.order() + beta.order();
    return detail::regroup_powers(product, total, taylor_N * total);
}

// ---------------------------------------------------------------------------
// Expansion terms and results
// ---------------------------------------------------------------------------

struct ClosedTerm {
    MultiIndex delta;
    // real polynomial C_delta(w); the full coefficient is
    // k_delta = i^{|delta|} C_delta (the factorials and signs are folded in)
    MultiPoly coefficient;
};

struct ExpansionTerm {
    MultiIndex alpha, beta;
    ComplexSymbol amplitude;  // pre-IBP form, in (x, y, k)
    std::optional<std::vector<ClosedTerm>> closed;
};

struct RemainderInfo {
    double order = 0.0;   // m - M
    double growth = 0.0;  // (mu + d) M
};

struct ExpansionResult {
    ComplexSymbol source_amplitude;  // canonical (x, y, k)
    QuantizingFunction target_tau;
    int order_M = 1;
    int taylor_N = 1;
    std::vector<ExpansionTerm> terms;
    RemainderInfo remainder;
};

namespace detail {

inline Complex i_power(int k) {
    switch (((k % 4) + 4) % 4) {
        case 0: return {1.0, 0.0};
        case 1: return {0.0, 1.0};
        case 2: return {-1.0, 0.0};
        default: return {0.0, -1.0};
    }
}

// (alpha, beta) pairs with |alpha|+|beta| < M, ordered by (|alpha|+|beta|, alpha, beta)
inline std::vector<std::pair<MultiIndex, MultiIndex>> term_index_pairs(int dim, int order_M) {
    std::vector<std::pair<MultiIndex, MultiIndex>> out;
    for (int total = 0; total < order_M; ++total)
        for (int oa = 0; oa <= total; ++oa)
            for (const auto& alpha : multi_indices_of_order(dim, oa))
                for (const auto& beta : multi_indices_of_order(dim, total - oa))
                    out.emplace_back(alpha, beta);
    std::stable_sort(out.begin(), out.end(), [](const auto& p, const auto& q) {
        int tp = p.first.order() + p.second.order();
        int tq = q.first.order() + q.second.order();
        if (tp != tq) return tp < tq;
        if (p.first != q.first) return p.first < q.first;
        return p.second < q.second;
    });
    return out;
}

// mixed x/y derivative cache built one differentiation at a time
class DerivativeLattice {
public:
    DerivativeLattice(ComplexSymbol base, std::vector<std::string> xv, std::vector<std::string> yv)
        : xv_(std::move(xv)), yv_(std::move(yv)) {
        cache_[key(MultiIndex(dim()), MultiIndex(dim()))] = std::move(base);
    }

    int dim() const { return static_cast<int>(xv_.size()); }

    const ComplexSymbol& get(const MultiIndex& alpha, const MultiIndex& beta) {
        auto k = key(alpha, beta);
        auto it = cache_.find(k);
        if (it != cache_.end()) return it->second;
        MultiIndex pa = alpha, pb = beta;
        std::string var;
        if (alpha.order() > 0) {
            int ax = 0;
            while (pa[ax] == 0) ++ax;
            --pa[ax];
            var = xv_[ax];
        } else {
            int ax = 0;
            while (pb[ax] == 0) ++ax;
            --pb[ax];
            var = yv_[ax];
        }
        ComplexSymbol d = get(pa, pb).diff(var);
        return cache_.emplace(key(alpha, beta), std::move(d)).first->second;
    }

private:
    static std::pair<std::vector<int>, std::vector<int>> key(const MultiIndex& a,
                                                             const MultiIndex& b) {
        return {a.e, b.e};
    }

    std::vector<std::string> xv_, yv_;
    std::map<std::pair<std::vector<int>, std::vector<int>>, ComplexSymbol> cache_;
};

// substitution x -> v, y -> v with v = x + tau(y - x)
inline std::map<std::string, SymbolExpr> diagonal_substitution(const QuantizingFunction& tau) {
    const int n = tau.dim;
    auto xs = x_names(n);
    auto ys = y_names(n);
    auto ws = w_names(n);
    std::map<std::string, SymbolExpr> wsub;
    for (int i = 0; i < n; ++i)
        wsub.emplace(ws[i], SymbolExpr::variable(ys[i]) - SymbolExpr::variable(xs[i]));
    std::map<std::string, SymbolExpr> sub;
    for (int i = 0; i < n; ++i) {
        SymbolExpr v = SymbolExpr::variable(xs[i]) + tau.components[i].substitute(wsub);
        sub.emplace(xs[i], v);
        sub.emplace(ys[i], v);
    }
    return sub;
}

// Taylor displacement factor [-tau(-w)]^alpha [-w - tau(-w)]^beta expressed
// in (x, y): the first factor is -tau(y-x), the second (y-x) - tau(y-x).
inline SymbolExpr displacement_factor(const QuantizingFunction& tau, const MultiIndex& alpha,
                                      const MultiIndex& beta) {
    const int n = tau.dim;
    auto xs = x_names(n);
    auto ys = y_names(n);
    auto ws = w_names(n);
    std::map<std::string, SymbolExpr> wsub;
    for (int i = 0; i < n; ++i)
        wsub.emplace(ws[i], SymbolExpr::variable(ys[i]) - SymbolExpr::variable(xs[i]));
    SymbolExpr f = SymbolExpr::constant(1.0);
    for (int i = 0; i < n; ++i) {
        if (alpha[i] > 0) {
            SymbolExpr t = -tau.components[i].substitute(wsub);
            f = f * SymbolExpr::pow(t, static_cast<double>(alpha[i]));
        }
        if (beta[i] > 0) {
            SymbolExpr t = (SymbolExpr::variable(ys[i]) - SymbolExpr::variable(xs[i])) -
                           tau.components[i].substitute(wsub);
            f = f * SymbolExpr::pow(t, static_cast<double>(beta[i]));
        }
    }
    return f;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// amplitude -> tau-symbol expansion
// ---------------------------------------------------------------------------

// `amplitude_order` and `amplitude_growth` are the (m, d) metadata of the
// input amplitude class; they only feed the remainder descriptor.
inline ExpansionResult amplitude_to_symbol_terms(const ComplexSymbol& amplitude,
                                                 const QuantizingFunction& tau, int order_M,
                                                 int taylor_N, double amplitude_order = 0.0,
                                                 double amplitude_growth = 0.0) {
    if (order_M < 1) throw ValidationError("expansion order M must be >= 1");
    if (taylor_N < 1) throw ValidationError("taylor depth N must be >= 1");
    constexpr std::size_t kNodeGuard = 1000000;
    const int n = tau.dim;

    ExpansionResult res;
    res.source_amplitude = amplitude.canonicalized(n);
    res.target_tau = tau;
    res.order_M = order_M;
    res.taylor_N = taylor_N;
    res.remainder.order = amplitude_order - order_M;
    res.remainder.growth = (tau.declared_order.value_or(0.0) + amplitude_growth) * order_M;

    auto vsub = detail::diagonal_substitution(tau);
    detail::DerivativeLattice lattice(res.source_amplitude, x_names(n), y_names(n));

    // tau~(w) = -tau(-w) drives the closed regrouping:
    //   [-tau(-w)]^a [-w-tau(-w)]^b = (-1)^{|b|} [tau~]^a [w - tau~]^b
    std::optional<std::vector<MultiPoly>> tau_tilde;
    if (auto polys = detail::tau_polynomials(tau)) {
        tau_tilde = std::vector<MultiPoly>();
        for (const auto& p : *polys) tau_tilde->push_back(-p.reflected());
    }

    for (const auto& [alpha, beta] : detail::term_index_pairs(n, order_M)) {
        ExpansionTerm term;
        term.alpha = alpha;
        term.beta = beta;
        double inv_fact = 1.0 / (static_cast<double>(alpha.factorial()) *
                                 static_cast<double>(beta.factorial()));
        ComplexSymbol deriv = lattice.get(alpha, beta).substitute(vsub);
        SymbolExpr factor = detail::displacement_factor(tau, alpha, beta);
        term.amplitude = deriv.scaled(factor).scaled(Complex(inv_fact, 0.0));
        if (term.amplitude.node_count() > kNodeGuard)
            throw NumericalError("expansion term grew too large");

        if (tau_tilde) {
            MultiPoly product = detail::factor_product(*tau_tilde, alpha, beta);
            if ((beta.order() % 2) != 0) product = -product;
            int total = alpha.order() + beta.order();
            Rational scale = Rational(1, alpha.factorial()) * Rational(1, beta.factorial());
            std::vector<ClosedTerm> closed;
            for (auto& ft : detail::regroup_powers(product, total, taylor_N * total)) {
                ClosedTerm ct;
                ct.delta = ft.delta;
                ct.coefficient = ft.coefficient.scaled(scale);
                closed.push_back(std::move(ct));
            }
            term.closed = std::move(closed);
        }
        res.terms.push_back(std::move(term));
    }
    return res;
}

// ---------------------------------------------------------------------------
// Assembling and reading expansions
// ---------------------------------------------------------------------------

enum class ExpansionForm { PreIbp, Closed };

// The post-IBP amplitude of one closed piece:
//   i^{|delta|} C_delta(x-y) [dx^a dy^b dxi^delta A](v,v,xi)
inline ComplexSymbol closed_piece_amplitude(const ExpansionResult& res, const ExpansionTerm& term,
                                            const ClosedTerm& piece) {
    const int n = res.target_tau.dim;
    ComplexSymbol d = res.source_amplitude;
    auto xs = x_names(n);
    auto ys = y_names(n);
    auto ks = k_names(n);
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < term.alpha[i]; ++c) d = d.diff(xs[i]);
        for (int c = 0; c < term.beta[i]; ++c) d = d.diff(ys[i]);
        for (int c = 0; c < piece.delta[i]; ++c) d = d.diff(ks[i]);
    }
    d = d.substitute(detail::diagonal_substitution(res.target_tau));
    std::vector<std::string> diff_names;
    for (int i = 0; i < n; ++i) diff_names.push_back("__w" + std::to_string(i));
    SymbolExpr cw = piece.coefficient.to_expr(diff_names);
    std::map<std::string, SymbolExpr> wsub;
    for (int i = 0; i < n; ++i)
        wsub.emplace(diff_names[i], SymbolExpr::variable(xs[i]) - SymbolExpr::variable(ys[i]));
    cw = cw.substitute(wsub);
    return d.scaled(cw).scaled(detail::i_power(piece.delta.order()));
}

inline OperatorMatrix assemble_expansion(const ExpansionResult& res, const Grid& g,
                                         ExpansionForm form = ExpansionForm::PreIbp,
                                         int threads = 0) {
    if (res.target_tau.dim != g.dim()) throw ValidationError("expansion/grid dimension mismatch");
    OperatorMatrix acc(g, {"expansion", res.target_tau.name,
                           form == ExpansionForm::PreIbp ? "expansion-pre-ibp" : "expansion-closed"});
    for (const auto& term : res.terms) {
        if (form == ExpansionForm::PreIbp) {
            if (term.amplitude.is_zero()) continue;
            acc.mat += op_amplitude(term.amplitude, g, DiffConvention::Wrapped, threads).mat;
        } else {
            if (!term.closed)
                throw ValidationError("closed-form assembly requires a polynomial target tau");
            for (const auto& piece : *term.closed) {
                ComplexSymbol amp = closed_piece_amplitude(res, term, piece);
                if (amp.is_zero()) continue;
                acc.mat += op_amplitude(amp, g, DiffConvention::Wrapped, threads).mat;
            }
        }
    }
    return acc;
}

// Reads one term off as a symbol in (x, k); requires the closed coefficients
// to be constants (target tau polynomial with taylor_N >= deg tau).
inline ComplexSymbol term_symbol(const ExpansionResult& res, const ExpansionTerm& term) {
    if (!term.closed) throw ValidationError("term has no closed form");
    const int n = res.target_tau.dim;
    auto xs = x_names(n);
    auto ys = y_names(n);
    auto ks = k_names(n);
    ComplexSymbol sym;
    for (const auto& piece : *term.closed) {
        if (!piece.coefficient.is_constant())
            throw ValidationError(
                "term coefficient depends on x - y; raise the taylor depth N for this tau");
        ComplexSymbol d = res.source_amplitude;
        for (int i = 0; i < n; ++i) {
            for (int c = 0; c < term.alpha[i]; ++c) d = d.diff(xs[i]);
            for (int c = 0; c < term.beta[i]; ++c) d = d.diff(ys[i]);
            for (int c = 0; c < piece.delta[i]; ++c) d = d.diff(ks[i]);
        }
        std::map<std::string, SymbolExpr> diag;
        for (int i = 0; i < n; ++i) diag.emplace(ys[i], SymbolExpr::variable(xs[i]));
        d = d.substitute(diag);
        Complex k_const =
            detail::i_power(piece.delta.order()) * piece.coefficient.constant_value().to_double();
        sym = sym + d.scaled(k_const);
    }
    return sym;
}

inline ComplexSymbol expansion_symbol(const ExpansionResult& res) {
    ComplexSymbol sym;
    for (const auto& term : res.terms) sym = sym + term_symbol(res, term);
    return sym;
}

// ---------------------------------------------------------------------------
// Quantization change, adjoint/transpose, composition
// ---------------------------------------------------------------------------

inline ExpansionResult convert_quantization(const ComplexSymbol& sigma,
                                            const QuantizingFunction& tau_from,
                                            const QuantizingFunction& tau_to, int order_M,
                                            int taylor_N = 1, double symbol_order = 0.0) {
    if (tau_from.dim != tau_to.dim) throw ValidationError("tau dimension mismatch");
    ComplexSymbol a = amplitude_of_symbol(sigma, tau_from);
    double growth = tau_from.declared_order.value_or(0.0);
    return amplitude_to_symbol_terms(a, tau_to, order_M, taylor_N, symbol_order, growth);
}

enum class DualKind { Transpose, Adjoint };

// Transpose: (sigma(x,-xi), tau*). Adjoint: (conj sigma, tau*).
inline std::pair<ComplexSymbol, QuantizingFunction> dual_quantization(const ComplexSymbol& sigma,
                                                                      const QuantizingFunction& tau,
                                                                      DualKind kind) {
    ComplexSymbol sc = sigma.canonicalized(tau.dim);
    QuantizingFunction tau_star = dual(tau);
    if (kind == DualKind::Adjoint) return {sc.conjugated(), tau_star};
    std::map<std::string, SymbolExpr> negk;
    for (const auto& k : k_names(tau.dim)) negk.emplace(k, -SymbolExpr::variable(k));
    return {sc.substitute(negk), tau_star};
}

// Composition via the exact discrete identity
//   Op_KN(s') Op_AKN(s'') = Op_amplitude(s'(x,xi) s''(y,xi)):
// sigma1 -> KN symbol, sigma2 -> AKN symbol, product amplitude, then
// expansion toward tau3.
inline ExpansionResult compose_expansion(const ComplexSymbol& sigma1,
                                         const QuantizingFunction& tau1,
                                         const ComplexSymbol& sigma2,
                                         const QuantizingFunction& tau2,
                                         const QuantizingFunction& tau3, int order_M,
                                         int taylor_N = 1, double order1 = 0.0,
                                         double order2 = 0.0) {
    const int n = tau1.dim;
    if (tau2.dim != n || tau3.dim != n) throw ValidationError("tau dimension mismatch");
    ComplexSymbol kn_symbol =
        expansion_symbol(convert_quantization(sigma1, tau1, make_preset(TauPreset::Kn, n), order_M,
                                              taylor_N, order1));
    ComplexSymbol akn_symbol =
        expansion_symbol(convert_quantization(sigma2, tau2, make_preset(TauPreset::Akn, n), order_M,
                                              taylor_N, order2));
    auto xs = x_names(n);
    auto ys = y_names(n);
    std::map<std::string, SymbolExpr> to_y;
    for (int i = 0; i < n; ++i) to_y.emplace(xs[i], SymbolExpr::variable(ys[i]));
    ComplexSymbol product = kn_symbol * akn_symbol.substitute(to_y);
    double growth = tau1.declared_order.value_or(0.0) + tau2.declared_order.value_or(0.0);
    return amplitude_to_symbol_terms(product, tau3, order_M, taylor_N, order1 + order2, growth);
}

// ---------------------------------------------------------------------------
// Parametrix
// ---------------------------------------------------------------------------

// Smooth cutoff vanishing for |xi| <= R0 and equal to 1 for |xi| >= 2 R0,
// built from the cubic ramp. R0 = 0 disables the cutoff.
inline SymbolExpr frequency_cutoff(double R0, int dim) {
    if (R0 < 0) throw ValidationError("cutoff radius must be >= 0");
    if (R0 == 0.0) return SymbolExpr::constant(1.0);
    SymbolExpr xi2 = SymbolExpr::constant(0.0);
    for (const auto& k : k_names(dim))
        xi2 = xi2 + SymbolExpr::pow(SymbolExpr::variable(k), 2.0);
    SymbolExpr absxi = SymbolExpr::call(Func::Sqrt, {xi2});
    SymbolExpr arg = (absxi - SymbolExpr::constant(R0)) / SymbolExpr::constant(R0);
    return SymbolExpr::call(Func::Ramp, {arg});
}

namespace detail {

inline ComplexSymbol complex_divide(const ComplexSymbol& num, const ComplexSymbol& den) {
    SymbolExpr mod2 = den.re * den.re + den.im * den.im;
    SymbolExpr re = (num.re * den.re + num.im * den.im) / mod2;
    SymbolExpr im = (num.im * den.re - num.re * den.im) / mod2;
    return {re, im};
}

}  // namespace detail

struct ParametrixOptions {
    double x_halfwidth = M_PI;   // ellipticity probe box
    double xi_halfwidth = 64.0;
    int samples = 4096;
};

// kappa = sum_{j<M} kappa_j with kappa_0 = chi/sigma_1 and each kappa_j
// cancelling the next order of the Kohn-Nirenberg composition expansion
//   sum_gamma (i^{-|gamma|}/gamma!) dxi^gamma kappa dx^gamma sigma_1,
// then converted back to a tau-symbol.
inline ComplexSymbol parametrix(const ComplexSymbol& sigma, const QuantizingFunction& tau,
                                double symbol_order, int order_M, double R0,
                                const ParametrixOptions& opts = {}) {
    if (order_M < 1) throw ValidationError("parametrix order must be >= 1");
    const int n = tau.dim;
    constexpr std::size_t kNodeGuard = 1000000;

    auto tau_polys = detail::tau_polynomials(tau);
    if (!tau_polys)
        throw ValidationError(
            "parametrix: converting back requires a polynomial tau (terminating Taylor data)");
    int tau_deg = 0;
    for (const auto& p : *tau_polys) tau_deg = std::max(tau_deg, p.total_degree());
    int target_N = std::max(1, tau_deg);

    QuantizingFunction kn = make_preset(TauPreset::Kn, n);
    ComplexSymbol sigma1 =
        expansion_symbol(convert_quantization(sigma, tau, kn, order_M, 1, symbol_order));

    auto C = ellipticity(sigma1, n, symbol_order, R0, opts.x_halfwidth, opts.xi_halfwidth,
                         opts.samples);
    if (!C)
        throw ValidationError("parametrix: symbol is not elliptic of the stated order beyond R0");

    SymbolExpr chi = frequency_cutoff(R0, n);
    ComplexSymbol inv_sigma = detail::complex_divide(ComplexSymbol(chi), sigma1);

    auto ks = k_names(n);
    auto xs = x_names(n);
    std::vector<ComplexSymbol> kappa;
    kappa.push_back(inv_sigma);  // kappa_0
    for (int s = 1; s < order_M; ++s) {
        ComplexSymbol acc;
        for (int j = 0; j < s; ++j) {
            for (const auto& gamma : multi_indices_of_order(n, s - j)) {
                ComplexSymbol dk = kappa[j];
                ComplexSymbol ds = sigma1;
                for (int i = 0; i < n; ++i)
                    for (int c = 0; c < gamma[i]; ++c) {
                        dk = dk.diff(ks[i]);
                        ds = ds.diff(xs[i]);
                    }
                Complex coef = detail::i_power(-gamma.order()) /
                               static_cast<double>(gamma.factorial());
                acc = acc + (dk * ds).scaled(coef);
            }
        }
        ComplexSymbol next = (inv_sigma * acc).scaled(Complex(-1.0, 0.0));
        if (next.node_count() > kNodeGuard)
            throw NumericalError("parametrix symbol grew too large; lower M");
        kappa.push_back(std::move(next));
    }
    ComplexSymbol kappa_kn;
    for (const auto& k : kappa) kappa_kn = kappa_kn + k;

    bool tau_is_zero = true;
    for (const auto& p : *tau_polys) tau_is_zero = tau_is_zero && p.is_zero();
    if (tau_is_zero) return kappa_kn;
    return expansion_symbol(
        convert_quantization(kappa_kn, kn, tau, order_M, target_N, -symbol_order));
}

// ---------------------------------------------------------------------------
// Leading-order change of variables (bounded-derivative tau)
// ---------------------------------------------------------------------------

struct ChangeVarReport {
    Eigen::MatrixXd tau_jacobian_at_0;
    double det_inv_map = 0.0;   // |det d(tau_x^{-1})/dw (x)|
    double det_L_inverse = 0.0; // |det L_xx^{-1}|
    Eigen::MatrixXd L_prime;    // [L_xx^t]^{-1}
    double rel_mismatch = -1.0; // A u vs composed leading-order operator
    AdmissibilityReport admissibility;
};

namespace detail {

// trig interpolation of a band-limited grid function at an off-grid point
inline Complex trig_interpolate(const GridFunction& uhat, std::span<const double> pt) {
    const Grid& g = uhat.grid;
    double weight = 1.0;
    for (int d = 0; d < g.dim(); ++d) weight *= g.dxi() / (2.0 * M_PI);
    Complex acc(0, 0);
    double fq[2];
    for (int q = 0; q < g.size(); ++q) {
        g.frequency_point(q, fq);
        double angle = 0.0;
        for (int d = 0; d < g.dim(); ++d) angle += pt[d] * fq[d];
        acc += uhat.values[q] * std::polar(1.0, angle);
    }
    return acc * weight;
}

}  // namespace detail

inline std::pair<ComplexSymbol, ChangeVarReport> changevar_leading(const ComplexSymbol& sigma,
                                                                   const QuantizingFunction& tau,
                                                                   const Grid& g) {
    const int n = tau.dim;
    if (g.dim() != n) throw ValidationError("tau/grid dimension mismatch");
    ChangeVarReport rep;
    rep.admissibility = check_admissible(tau, std::max(5.0, g.half_length()), 2000);
    if (!rep.admissibility.bounded_derivatives || !rep.admissibility.hadamard_ok)
        throw ValidationError(
            "changevar_leading requires bounded derivatives and a Hadamard-invertible tau");

    std::vector<double> zero(n, 0.0);
    Eigen::MatrixXd J = tau_jacobian(tau, zero);
    rep.tau_jacobian_at_0 = J;
    double detJ = J.determinant();
    if (std::abs(detJ) < 1e-12) throw NumericalError("tau Jacobian at 0 is singular");
    // L_xx = J^{-1} (Jacobian of w -> tau_x^{-1}(x) - tau_x^{-1}(w) at w = x)
    rep.det_inv_map = std::abs(1.0 / detJ);
    rep.det_L_inverse = std::abs(detJ);
    rep.L_prime = J.transpose();

    // b0(x, xi) = sigma(x, L' xi) |det d tau_x^{-1}| |det L^{-1}|
    ComplexSymbol sc = sigma.canonicalized(n);
    auto ks = k_names(n);
    std::map<std::string, SymbolExpr> ksub;
    for (int i = 0; i < n; ++i) {
        SymbolExpr row = SymbolExpr::constant(0.0);
        for (int j = 0; j < n; ++j)
            row = row + SymbolExpr::constant(rep.L_prime(i, j)) * SymbolExpr::variable(ks[j]);
        ksub.emplace(ks[i], row);
    }
    ComplexSymbol b0 = sc.substitute(ksub).scaled(
        Complex(rep.det_inv_map * rep.det_L_inverse, 0.0));

    // numerical comparison on a band-limited, centrally supported test function
    GridFunction uhat(g);
    double fq[2];
    for (int q = 0; q < g.size(); ++q) {
        g.frequency_point(q, fq);
        double s2 = 0.0;
        for (int d = 0; d < n; ++d) s2 += fq[d] * fq[d];
        double width = g.max_frequency() / 6.0;
        uhat.values[q] = std::exp(-s2 / (width * width));
    }
    GridFunction u = idft(uhat);
    GridFunction Au = apply(op_symbol(sc, tau, g), u);

    auto slots = make_slots({x_names(n), ks});
    CompiledExpr bre = CompiledExpr::compile(b0.re, slots);
    CompiledExpr bim = CompiledExpr::compile(b0.im, slots);
    GridFunction Cu(g);
    const auto tw = detail::unit_roots(g.points_per_axis());
    const int N = g.points_per_axis();
    const double scale = 1.0 / static_cast<double>(g.size());
    detail::parallel_rows(g.size(), detail::assembly_threads(0), [&](int j) {
        int jidx[2], lidx[2], qidx[2];
        g.decode(j, jidx);
        std::vector<double> xj(n), yl(n), vars(2 * n);
        for (int d = 0; d < n; ++d) {
            xj[d] = g.node(jidx[d]);
            vars[d] = xj[d];
        }
        Complex acc(0, 0);
        for (int l = 0; l < g.size(); ++l) {
            g.decode(l, lidx);
            for (int d = 0; d < n; ++d) yl[d] = g.node(lidx[d]);
            auto yback = invert_tau_x(tau, xj, yl, 1e-12);
            Complex uval = detail::trig_interpolate(uhat, yback);
            Complex inner(0, 0);
            for (int q = 0; q < g.size(); ++q) {
                g.decode(q, qidx);
                Complex phase(1.0, 0.0);
                for (int d = 0; d < n; ++d) {
                    vars[n + d] = g.frequency(qidx[d]);
                    phase *= tw[detail::mod_index(
                        static_cast<long long>(jidx[d] - lidx[d]) * (qidx[d] - N / 2), N)];
                }
                inner += Complex(bre.eval(vars), bim.eval(vars)) * phase;
            }
            acc += inner * uval;
        }
        Cu.values[j] = acc * scale;
    });

    double num = 0.0, den = 0.0;
    for (int j = 0; j < g.size(); ++j) {
        num += std::norm(Au.values[j] - Cu.values[j]);
        den += std::norm(Au.values[j]);
    }
    rep.rel_mismatch = den > 0 ? std::sqrt(num / den) : 0.0;
    return {b0, rep};
}

}  // namespace tauq
