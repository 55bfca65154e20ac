#pragma once

// Operator norms, the Calderon-Vaillancourt derivative-sup probe, ellipticity
// sampling, and the Garding-inequality fit.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <optional>

#include "tauquant/multi_index.hpp"
#include "tauquant/quantize.hpp"
#include "tauquant/sampling.hpp"

namespace tauq {

// ---------------------------------------------------------------------------
// Operator norm (largest singular value)
// ---------------------------------------------------------------------------

struct NormReport {
    double norm = 0.0;
    std::string method;
    int iterations = 0;
    double residual = 0.0;
};

inline NormReport operator_norm(const Eigen::MatrixXcd& A,
                                const std::string& method = "power-iteration") {
    if (A.rows() != A.cols()) throw ValidationError("operator_norm needs a square matrix");
    NormReport rep;
    rep.method = method;
    if (method == "full-decomposition") {
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(A);
        rep.norm = svd.singularValues()(0);
        return rep;
    }
    if (method != "power-iteration") throw ValidationError("unknown norm method: " + method);

    // power iteration on A^H A
    const int n = static_cast<int>(A.rows());
    Eigen::VectorXcd v = Eigen::VectorXcd::Ones(n) / std::sqrt(static_cast<double>(n));
    double lambda = 0.0;
    for (int it = 1; it <= 5000; ++it) {
        Eigen::VectorXcd w = A.adjoint() * (A * v);
        double nw = w.norm();
        if (nw == 0.0) {  // zero operator
            rep.norm = 0.0;
            rep.iterations = it;
            return rep;
        }
        lambda = std::real(v.dot(w));
        double residual = (w - lambda * v).norm() / std::max(lambda, 1e-300);
        v = w / nw;
        if (residual <= 1e-9) {
            rep.norm = std::sqrt(std::max(lambda, 0.0));
            rep.iterations = it;
            rep.residual = residual;
            return rep;
        }
        rep.residual = residual;
        rep.iterations = it;
    }
    throw NumericalError("operator norm power iteration did not converge");
}

inline NormReport operator_norm(const OperatorMatrix& A,
                                const std::string& method = "power-iteration") {
    return operator_norm(A.mat, method);
}

inline double max_abs(const Eigen::MatrixXcd& A) { return A.cwiseAbs().maxCoeff(); }

// ---------------------------------------------------------------------------
// Calderon-Vaillancourt derivative-sup probe
// ---------------------------------------------------------------------------

struct CVEntry {
    MultiIndex alpha, beta, gamma;
    double sup = 0.0;
};

struct CVReport {
    double m_val = 0.0;  // max over the table
    std::vector<CVEntry> table;
    double box_x = 0.0, box_y = 0.0, box_xi = 0.0;
    int samples = 0;
    // tau-derivative sups up to order 4n+2 when the (sigma, tau) form is used
    std::optional<std::vector<std::pair<MultiIndex, double>>> tau_derivative_sups;
};

namespace detail {

// derivative of `base` by the three variable groups, built incrementally
inline ComplexSymbol group_derivative(
    std::map<std::tuple<std::vector<int>, std::vector<int>, std::vector<int>>, ComplexSymbol>&
        cache,
    const ComplexSymbol& base, int dim, const MultiIndex& alpha, const MultiIndex& beta,
    const MultiIndex& gamma) {
    auto key = std::make_tuple(alpha.e, beta.e, gamma.e);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    if (alpha.is_zero() && beta.is_zero() && gamma.is_zero()) {
        cache.emplace(key, base);
        return base;
    }
    MultiIndex pa = alpha, pb = beta, pg = gamma;
    std::string var;
    if (!gamma.is_zero()) {
        int ax = 0;
        while (pg[ax] == 0) ++ax;
        --pg[ax];
        var = k_names(dim)[ax];
    } else if (!beta.is_zero()) {
        int ax = 0;
        while (pb[ax] == 0) ++ax;
        --pb[ax];
        var = y_names(dim)[ax];
    } else {
        int ax = 0;
        while (pa[ax] == 0) ++ax;
        --pa[ax];
        var = x_names(dim)[ax];
    }
    ComplexSymbol d = group_derivative(cache, base, dim, pa, pb, pg).diff(var);
    cache.emplace(key, d);
    return d;
}

}  // namespace detail

inline CVReport cv_bound(const ComplexSymbol& amplitude, int dim, double box_x, double box_y,
                         double box_xi, int samples = 4096) {
    if (samples < 16) throw ValidationError("cv_bound needs at least 16 samples");
    const int order_cap = 2 * dim + 1;
    ComplexSymbol a = amplitude.canonicalized(dim);

    CVReport rep;
    rep.box_x = box_x;
    rep.box_y = box_y;
    rep.box_xi = box_xi;
    rep.samples = samples;

    QuasiRandomSequence seq(3 * dim);
    std::vector<std::vector<double>> pts(samples);
    for (int i = 0; i < samples; ++i) {
        auto p = seq.point(i);
        for (int d = 0; d < dim; ++d) {
            p[d] = (2.0 * p[d] - 1.0) * box_x;
            p[dim + d] = (2.0 * p[dim + d] - 1.0) * box_y;
            p[2 * dim + d] = (2.0 * p[2 * dim + d] - 1.0) * box_xi;
        }
        pts[i] = std::move(p);
    }

    auto slots = make_slots({x_names(dim), y_names(dim), k_names(dim)});
    std::map<std::tuple<std::vector<int>, std::vector<int>, std::vector<int>>, ComplexSymbol>
        cache;
    auto indices = multi_indices_up_to(dim, order_cap);
    std::vector<double> scratch;
    for (const auto& alpha : indices)
        for (const auto& beta : indices)
            for (const auto& gamma : indices) {
                ComplexSymbol d = detail::group_derivative(cache, a, dim, alpha, beta, gamma);
                CompiledExpr cre = CompiledExpr::compile(d.re, slots);
                CompiledExpr cim = CompiledExpr::compile(d.im, slots);
                CVEntry entry{alpha, beta, gamma, 0.0};
                for (const auto& p : pts) {
                    double re = cre.eval(p, scratch);
                    double im = cim.eval(p, scratch);
                    entry.sup = std::max(entry.sup, std::sqrt(re * re + im * im));
                }
                if (!std::isfinite(entry.sup))
                    throw NumericalError("non-finite derivative sup in cv_bound");
                rep.m_val = std::max(rep.m_val, entry.sup);
                rep.table.push_back(std::move(entry));
            }
    return rep;
}

// (sigma, tau) variant: probes the substituted amplitude and additionally the
// tau-derivative sups up to order 4n+2 (the corollary hypothesis).
inline CVReport cv_bound_symbol(const ComplexSymbol& sigma, const QuantizingFunction& tau,
                                double box_x, double box_y, double box_xi, int samples = 4096) {
    const int dim = tau.dim;
    CVReport rep = cv_bound(amplitude_of_symbol(sigma, tau), dim, box_x, box_y, box_xi, samples);
    auto derivs = detail::tau_derivatives(tau, 4 * dim + 2);
    QuasiRandomSequence seq(dim);
    double wbox = box_x + box_y;  // y - x ranges over the difference box
    std::vector<std::pair<MultiIndex, double>> sups;
    for (std::size_t di = 0; di < derivs.indices.size(); ++di) {
        double sup = 0.0;
        for (int i = 0; i < samples; ++i) {
            auto p = seq.point_in_box(i, wbox);
            for (int comp = 0; comp < dim; ++comp)
                sup = std::max(sup, std::abs(derivs.compiled[di][comp].eval(p)));
        }
        sups.emplace_back(derivs.indices[di], sup);
    }
    rep.tau_derivative_sups = std::move(sups);
    return rep;
}

// ---------------------------------------------------------------------------
// Ellipticity probe: C = inf_{|xi| >= R0} |sigma| / (1+|xi|)^m, or nullopt
// ---------------------------------------------------------------------------

inline std::optional<double> ellipticity(const ComplexSymbol& sigma, int dim, double m, double R0,
                                         double x_halfwidth, double xi_halfwidth,
                                         int samples = 4096) {
    if (xi_halfwidth <= R0) throw ValidationError("ellipticity probe box must extend beyond R0");
    ComplexSymbol sc = sigma.canonicalized(dim);
    auto slots = make_slots({x_names(dim), k_names(dim)});
    CompiledExpr cre = CompiledExpr::compile(sc.re, slots);
    CompiledExpr cim = CompiledExpr::compile(sc.im, slots);
    QuasiRandomSequence seq(2 * dim);
    double inf = std::numeric_limits<double>::infinity();
    int used = 0;
    for (int i = 0; used < samples; ++i) {
        if (i > 64 * samples) break;  // ring too thin for the box; keep what we have
        auto p = seq.point(i);
        double xi2 = 0.0;
        for (int d = 0; d < dim; ++d) {
            p[d] = (2.0 * p[d] - 1.0) * x_halfwidth;
            p[dim + d] = (2.0 * p[dim + d] - 1.0) * xi_halfwidth;
            xi2 += p[dim + d] * p[dim + d];
        }
        double absxi = std::sqrt(xi2);
        if (absxi < R0) continue;
        ++used;
        double re = cre.eval(p);
        double im = cim.eval(p);
        inf = std::min(inf, std::sqrt(re * re + im * im) / std::pow(1.0 + absxi, m));
    }
    if (used == 0) throw ValidationError("ellipticity probe found no points with |xi| >= R0");
    if (!(inf >= 1e-10)) return std::nullopt;
    return inf;
}

// ---------------------------------------------------------------------------
// Garding fit: Re<Au,u> >= C1 ||u||_{H^m}^2 - C2 ||u||_{H^s}^2
// ---------------------------------------------------------------------------

struct GardingReport {
    double C1 = 0.0;
    double C2 = 0.0;
    bool fit_ok = false;
    double hypothesis_C = 0.0;  // inf Re sigma / (1+|xi|)^{2m} over |xi| >= R
    double R = 0.0;             // frequency threshold used for the fit
    double min_eig_verification = 0.0;
    double verification_scale = 0.0;  // norm scale the tolerance refers to
};

namespace detail {

// matrix of the quadratic form u^H W u = ||u||_{H^s}^2
inline Eigen::MatrixXcd sobolev_form(const Grid& g, double s) {
    const int size = g.size();
    double dxn = 1.0, weight = 1.0;
    for (int d = 0; d < g.dim(); ++d) {
        dxn *= g.dx();
        weight *= g.dxi() / (2.0 * M_PI);
    }
    Eigen::MatrixXcd F(size, size);
    double xq[2], fp[2];
    for (int q = 0; q < size; ++q) {
        g.frequency_point(q, fp);
        for (int j = 0; j < size; ++j) {
            g.node_point(j, xq);
            double angle = 0.0;
            for (int d = 0; d < g.dim(); ++d) angle -= xq[d] * fp[d];
            F(q, j) = std::polar(dxn, angle);
        }
    }
    Eigen::VectorXd diag(size);
    for (int q = 0; q < size; ++q) {
        g.frequency_point(q, fp);
        double xi2 = 0.0;
        for (int d = 0; d < g.dim(); ++d) xi2 += fp[d] * fp[d];
        diag(q) = weight * std::pow(1.0 + xi2, s);
    }
    Eigen::MatrixXcd W = F.adjoint() * diag.asDiagonal() * F;
    return 0.5 * (W + W.adjoint());  // symmetrize against rounding
}

}  // namespace detail

inline GardingReport garding_check(const ComplexSymbol& sigma, const QuantizingFunction& tau,
                                   double m, double s, const Grid& g) {
    if (!(s < m)) throw ValidationError("garding_check requires s < m");
    const int n = g.dim();
    ComplexSymbol sc = sigma.canonicalized(n);
    GardingReport rep;

    OperatorMatrix A = op_symbol(sc, tau, g);
    double dxn = 1.0;
    for (int d = 0; d < n; ++d) dxn *= g.dx();
    Eigen::MatrixXcd H = 0.5 * dxn * (A.mat + A.mat.adjoint());

    // hypothesis probe: smallest grid frequency magnitude R with
    // inf_{|xi| >= R} Re sigma / (1+|xi|)^{2m} > 0, sampled over x
    auto slots = make_slots({x_names(n), k_names(n)});
    CompiledExpr cre = CompiledExpr::compile(sc.re, slots);
    std::vector<double> mags;
    double fp[2];
    for (int q = 0; q < g.size(); ++q) {
        g.frequency_point(q, fp);
        double xi2 = 0.0;
        for (int d = 0; d < n; ++d) xi2 += fp[d] * fp[d];
        mags.push_back(std::sqrt(xi2));
    }
    std::vector<double> sorted_mags = mags;
    std::sort(sorted_mags.begin(), sorted_mags.end());
    sorted_mags.erase(std::unique(sorted_mags.begin(), sorted_mags.end()), sorted_mags.end());

    QuasiRandomSequence xseq(n);
    const int x_samples = 256;
    auto hypothesis_inf = [&](double R) {
        double inf = std::numeric_limits<double>::infinity();
        std::vector<double> vars(2 * n);
        for (int q = 0; q < g.size(); ++q) {
            if (mags[q] < R) continue;
            int qidx[2];
            g.decode(q, qidx);
            for (int i = 0; i < x_samples; ++i) {
                auto xp = xseq.point_in_box(i, g.half_length());
                for (int d = 0; d < n; ++d) {
                    vars[d] = xp[d];
                    vars[n + d] = g.frequency(qidx[d]);
                }
                inf = std::min(inf,
                               cre.eval(vars) / std::pow(1.0 + mags[q], 2.0 * m));
            }
        }
        return inf;
    };

    rep.R = sorted_mags.back();
    rep.hypothesis_C = 0.0;
    for (double R : sorted_mags) {
        double c = hypothesis_inf(R);
        if (c > 1e-10) {
            rep.R = R;
            rep.hypothesis_C = c;
            break;
        }
    }

    Eigen::MatrixXcd Wm = detail::sobolev_form(g, m);
    Eigen::MatrixXcd Ws = detail::sobolev_form(g, s);

    // C1: half the Rayleigh infimum of H against Wm on the |xi| >= R modes
    std::vector<int> high;
    for (int q = 0; q < g.size(); ++q)
        if (mags[q] >= rep.R) high.push_back(q);
    if (high.empty()) {
        rep.fit_ok = false;
        return rep;
    }
    const int k = static_cast<int>(high.size());
    Eigen::MatrixXcd B(g.size(), k);
    double xq[2];
    for (int c = 0; c < k; ++c) {
        int qidx[2];
        g.decode(high[c], qidx);
        for (int j = 0; j < g.size(); ++j) {
            g.node_point(j, xq);
            double angle = 0.0;
            for (int d = 0; d < n; ++d) angle += xq[d] * g.frequency(qidx[d]);
            B(j, c) = std::polar(1.0, angle);
        }
    }
    Eigen::MatrixXcd Hp = B.adjoint() * H * B;
    Eigen::MatrixXcd Wp = B.adjoint() * Wm * B;
    Hp = 0.5 * (Hp + Hp.adjoint());
    Wp = 0.5 * (Wp + Wp.adjoint());
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXcd> ges(Hp, Wp);
    double rayleigh_inf = ges.eigenvalues().minCoeff();
    rep.C1 = 0.5 * rayleigh_inf;
    rep.fit_ok = rep.C1 > 0.0;
    if (!rep.fit_ok) return rep;

    // C2: smallest shift making H - C1 Wm + C2 Ws positive semidefinite
    Eigen::MatrixXcd G = H - rep.C1 * Wm;
    G = 0.5 * (G + G.adjoint());
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXcd> ges2(G, Ws);
    double mu_min = ges2.eigenvalues().minCoeff();
    rep.C2 = std::max(0.0, -mu_min);

    Eigen::MatrixXcd V = G + rep.C2 * Ws;
    V = 0.5 * (V + V.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(V);
    rep.min_eig_verification = es.eigenvalues().minCoeff();
    rep.verification_scale = H.norm();
    return rep;
}

}  // namespace tauq
