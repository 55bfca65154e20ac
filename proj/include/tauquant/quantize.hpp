#pragma once

// Dense assembly of tau-quantized and amplitude operators on periodic grids,
// application to grid functions, the Kohn-Nirenberg fast apply, and an
// independent brute-force oracle assembler.
//
//   A[j,l] = (dx dxi / 2pi)^n sum_q e^{i(x_j - y_l) xi_q} (summand),
// with summand sigma(x_j + tau(m(y_l - x_j)), xi_q) for symbols and
// a(x_j, y_l, xi_q) for amplitudes; m is the minimal-image map.

#include <Eigen/Dense>
#include <complex>
#include <cstdio>
#include <fstream>
#include <functional>
#include <thread>
#include <vector>

#include "tauquant/grid.hpp"
#include "tauquant/tau.hpp"
#include "tauquant/vars.hpp"

namespace tauq {

// Complex-valued symbol or amplitude as a (real, imaginary) expression pair.
struct ComplexSymbol {
    SymbolExpr re = SymbolExpr::constant(0.0);
    SymbolExpr im = SymbolExpr::constant(0.0);

    ComplexSymbol() = default;
    ComplexSymbol(SymbolExpr r) : re(std::move(r)) {}
    ComplexSymbol(SymbolExpr r, SymbolExpr i) : re(std::move(r)), im(std::move(i)) {}

    static ComplexSymbol parse(const std::string& re_text, const std::string& im_text = "") {
        ComplexSymbol s;
        s.re = parse_expression(re_text);
        if (!im_text.empty()) s.im = parse_expression(im_text);
        return s;
    }

    bool is_real() const { return im.is_constant(0.0); }
    bool is_zero() const { return re.is_constant(0.0) && im.is_constant(0.0); }

    ComplexSymbol conjugated() const { return {re, -im}; }

    ComplexSymbol diff(std::string_view var) const { return {re.diff(var), im.diff(var)}; }

    ComplexSymbol substitute(const std::map<std::string, SymbolExpr>& subst) const {
        return {re.substitute(subst), im.substitute(subst)};
    }

    ComplexSymbol canonicalized(int dim) const {
        return {canonicalize_names(re, dim), canonicalize_names(im, dim)};
    }

    // multiplication by a complex constant
    ComplexSymbol scaled(Complex c) const {
        SymbolExpr cr = SymbolExpr::constant(c.real());
        SymbolExpr ci = SymbolExpr::constant(c.imag());
        return {cr * re - ci * im, cr * im + ci * re};
    }

    ComplexSymbol scaled(const SymbolExpr& factor) const { return {factor * re, factor * im}; }

    friend ComplexSymbol operator+(const ComplexSymbol& a, const ComplexSymbol& b) {
        return {a.re + b.re, a.im + b.im};
    }

    friend ComplexSymbol operator*(const ComplexSymbol& a, const ComplexSymbol& b) {
        return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
    }

    std::size_t node_count() const { return re.node_count() + im.node_count(); }

    std::string to_string() const {
        if (is_real()) return re.to_string();
        return re.to_string() + " + i*(" + im.to_string() + ")";
    }
};

struct Provenance {
    std::string symbol_text;
    std::string tau_name;
    std::string path;  // standard | oracle | fast-kn | amplitude
};

struct OperatorMatrix {
    Grid grid;
    Eigen::MatrixXcd mat;
    Provenance prov;

    OperatorMatrix(const Grid& g, Provenance p = {})
        : grid(g), mat(Eigen::MatrixXcd::Zero(g.size(), g.size())), prov(std::move(p)) {}
};

// Which representative of y - x an amplitude sees: the raw grid difference,
// or y re-expressed as x + m(y - x). Amplitudes produced by tau-substitution
// and expansion terms use Wrapped so that difference factors match the
// periodic model; user-supplied amplitudes default to Raw.
enum class DiffConvention { Raw, Wrapped };

namespace detail {

inline int assembly_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("TAUQUANT_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(std::min(hc, 16u));
}

// Deterministic row-parallel loop: output depends only on per-row work.
inline void parallel_rows(int rows, int threads, const std::function<void(int)>& body) {
    threads = std::min(threads, rows);
    if (threads <= 1) {
        for (int r = 0; r < rows; ++r) body(r);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (int r = t; r < rows; r += threads) body(r);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline std::vector<Complex> unit_roots(int n) {
    std::vector<Complex> tw(n);
    for (int r = 0; r < n; ++r) tw[r] = std::polar(1.0, 2.0 * M_PI * r / n);
    return tw;
}

inline int mod_index(long long a, int n) {
    int r = static_cast<int>(a % n);
    return r < 0 ? r + n : r;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Assemblers
// ---------------------------------------------------------------------------

inline OperatorMatrix op_symbol(const ComplexSymbol& sigma, const QuantizingFunction& tau,
                                const Grid& g, int threads = 0) {
    if (tau.dim != g.dim()) throw ValidationError("tau/grid dimension mismatch");
    const int n = g.dim();
    const int N = g.points_per_axis();
    const int size = g.size();
    ComplexSymbol sc = sigma.canonicalized(n);

    auto slots = make_slots({x_names(n), k_names(n)});
    CompiledExpr cre = CompiledExpr::compile(sc.re, slots);
    CompiledExpr cim = CompiledExpr::compile(sc.im, slots);
    auto wslots = make_slots({w_names(n)});
    std::vector<CompiledExpr> tau_c;
    for (const auto& c : tau.components) tau_c.push_back(CompiledExpr::compile(c, wslots));

    const auto tw = detail::unit_roots(N);
    const double scale = 1.0 / static_cast<double>(size);  // (dx dxi / 2pi)^n = N^{-n}

    OperatorMatrix A(g, {sc.to_string(), tau.name, "standard"});
    detail::parallel_rows(size, detail::assembly_threads(threads), [&](int j) {
        int jidx[2], lidx[2];
        g.decode(j, jidx);
        std::vector<double> vars(2 * n), wvals(n), scratch;
        for (int l = 0; l < size; ++l) {
            g.decode(l, lidx);
            for (int d = 0; d < n; ++d)
                wvals[d] = g.wrap_difference((lidx[d] - jidx[d]) * g.dx());
            for (int d = 0; d < n; ++d) vars[d] = g.node(jidx[d]) + tau_c[d].eval(wvals, scratch);
            Complex acc(0, 0);
            if (n == 1) {
                const int dj = jidx[0] - lidx[0];
                for (int q = 0; q < N; ++q) {
                    vars[1] = g.frequency(q);
                    Complex val(cre.eval(vars, scratch), cim.eval(vars, scratch));
                    acc += val * tw[detail::mod_index(static_cast<long long>(dj) * (q - N / 2), N)];
                }
            } else {
                const int dj0 = jidx[0] - lidx[0], dj1 = jidx[1] - lidx[1];
                for (int q0 = 0; q0 < N; ++q0) {
                    vars[2] = g.frequency(q0);
                    Complex p0 = tw[detail::mod_index(static_cast<long long>(dj0) * (q0 - N / 2), N)];
                    for (int q1 = 0; q1 < N; ++q1) {
                        vars[3] = g.frequency(q1);
                        Complex val(cre.eval(vars, scratch), cim.eval(vars, scratch));
                        acc += val * (p0 * tw[detail::mod_index(
                                               static_cast<long long>(dj1) * (q1 - N / 2), N)]);
                    }
                }
            }
            if (!std::isfinite(acc.real()) || !std::isfinite(acc.imag()))
                throw NumericalError("non-finite operator entry");
            A.mat(j, l) = acc * scale;
        }
    });
    return A;
}

inline OperatorMatrix op_amplitude(const ComplexSymbol& amplitude, const Grid& g,
                                   DiffConvention conv = DiffConvention::Raw, int threads = 0) {
    const int n = g.dim();
    const int N = g.points_per_axis();
    const int size = g.size();
    ComplexSymbol ac = amplitude.canonicalized(n);

    auto slots = make_slots({x_names(n), y_names(n), k_names(n)});
    CompiledExpr cre = CompiledExpr::compile(ac.re, slots);
    CompiledExpr cim = CompiledExpr::compile(ac.im, slots);

    const auto tw = detail::unit_roots(N);
    const double scale = 1.0 / static_cast<double>(size);

    OperatorMatrix A(g, {ac.to_string(), "", "amplitude"});
    detail::parallel_rows(size, detail::assembly_threads(threads), [&](int j) {
        int jidx[2], lidx[2];
        g.decode(j, jidx);
        std::vector<double> vars(3 * n), scratch;
        for (int d = 0; d < n; ++d) vars[d] = g.node(jidx[d]);
        for (int l = 0; l < size; ++l) {
            g.decode(l, lidx);
            for (int d = 0; d < n; ++d) {
                // the wrapped image uses the exact lattice difference (l-j) dx,
                // so tie-breaking at |y-x| = L matches op_symbol
                vars[n + d] = conv == DiffConvention::Raw
                                  ? g.node(lidx[d])
                                  : vars[d] + g.wrap_difference((lidx[d] - jidx[d]) * g.dx());
            }
            Complex acc(0, 0);
            if (n == 1) {
                const int dj = jidx[0] - lidx[0];
                for (int q = 0; q < N; ++q) {
                    vars[2] = g.frequency(q);
                    Complex val(cre.eval(vars, scratch), cim.eval(vars, scratch));
                    acc += val * tw[detail::mod_index(static_cast<long long>(dj) * (q - N / 2), N)];
                }
            } else {
                const int dj0 = jidx[0] - lidx[0], dj1 = jidx[1] - lidx[1];
                for (int q0 = 0; q0 < N; ++q0) {
                    vars[4] = g.frequency(q0);
                    Complex p0 = tw[detail::mod_index(static_cast<long long>(dj0) * (q0 - N / 2), N)];
                    for (int q1 = 0; q1 < N; ++q1) {
                        vars[5] = g.frequency(q1);
                        Complex val(cre.eval(vars, scratch), cim.eval(vars, scratch));
                        acc += val * (p0 * tw[detail::mod_index(
                                               static_cast<long long>(dj1) * (q1 - N / 2), N)]);
                    }
                }
            }
            if (!std::isfinite(acc.real()) || !std::isfinite(acc.imag()))
                throw NumericalError("non-finite operator entry");
            A.mat(j, l) = acc * scale;
        }
    });
    return A;
}

// The tau-substituted amplitude sigma(x + tau(y - x), xi) as an expression in
// (x, y, k) variables; assembled with the Wrapped convention this matches
// op_symbol summand-for-summand.
inline ComplexSymbol amplitude_of_symbol(const ComplexSymbol& sigma,
                                         const QuantizingFunction& tau) {
    const int n = tau.dim;
    ComplexSymbol sc = sigma.canonicalized(n);
    auto xs = x_names(n);
    auto ys = y_names(n);
    auto ws = w_names(n);
    std::map<std::string, SymbolExpr> wsub;
    for (int i = 0; i < n; ++i)
        wsub.emplace(ws[i], SymbolExpr::variable(ys[i]) - SymbolExpr::variable(xs[i]));
    std::map<std::string, SymbolExpr> xsub;
    for (int i = 0; i < n; ++i)
        xsub.emplace(xs[i], SymbolExpr::variable(xs[i]) + tau.components[i].substitute(wsub));
    return sc.substitute(xsub);
}

// ---------------------------------------------------------------------------
// Independent oracle: same mathematical value as op_symbol, computed with a
// separate tree-walking evaluator, reversed summation order and Kahan
// compensation. Deliberately shares no code with the fast assembler.
// ---------------------------------------------------------------------------

namespace oracle_detail {

struct Binding {
    const char* names[6];
    double values[6];
    int count = 0;

    void set(int i, const char* n, double v) {
        names[i] = n;
        values[i] = v;
        count = std::max(count, i + 1);
    }
};

inline double tree_eval(const SymbolExpr& e, const Binding& b) {
    switch (e.kind()) {
        case ExprKind::Constant: return e.value();
        case ExprKind::Variable: {
            for (int i = 0; i < b.count; ++i)
                if (e.var_name() == b.names[i]) return b.values[i];
            throw EvalError("unbound variable: " + e.var_name());
        }
        case ExprKind::Add: return tree_eval(e.arg(0), b) + tree_eval(e.arg(1), b);
        case ExprKind::Mul: {
            double lhs = tree_eval(e.arg(0), b);
            if (lhs == 0.0) return 0.0;
            double rhs = tree_eval(e.arg(1), b);
            return rhs == 0.0 ? 0.0 : lhs * rhs;
        }
        case ExprKind::Div: {
            double den = tree_eval(e.arg(1), b);
            if (den == 0.0) return std::numeric_limits<double>::quiet_NaN();
            return tree_eval(e.arg(0), b) / den;
        }
        case ExprKind::Neg: return -tree_eval(e.arg(0), b);
        case ExprKind::Pow: {
            double base = tree_eval(e.arg(0), b);
            double expo = tree_eval(e.arg(1), b);
            if (expo == std::rint(expo)) {
                double r = 1.0;
                long long k = static_cast<long long>(std::abs(expo));
                for (long long i = 0; i < k; ++i) r *= base;
                if (expo < 0) {
                    if (base == 0.0) throw EvalError("pow of zero with negative exponent");
                    r = 1.0 / r;
                }
                return r;
            }
            if (base <= 0.0) throw EvalError("pow domain error");
            return std::pow(base, expo);
        }
        case ExprKind::Call: {
            double args[8];
            for (int i = 0; i < e.arg_count(); ++i) args[i] = tree_eval(e.arg(i), b);
            return detail::apply_func(e.func(), std::span<const double>(args, e.arg_count()));
        }
    }
    throw EvalError("corrupt expression");
}

struct KahanSum {
    double sum = 0.0, carry = 0.0;
    void add(double v) {
        double y = v - carry;
        double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
};

}  // namespace oracle_detail

inline OperatorMatrix op_oracle(const ComplexSymbol& sigma, const QuantizingFunction& tau,
                                const Grid& g) {
    if (tau.dim != g.dim()) throw ValidationError("tau/grid dimension mismatch");
    const int n = g.dim();
    const int size = g.size();
    ComplexSymbol sc = sigma.canonicalized(n);
    const double two_L = 2.0 * g.half_length();
    const double scale = 1.0 / static_cast<double>(size);

    auto xs = x_names(n);
    auto ks = k_names(n);
    auto ws = w_names(n);

    OperatorMatrix A(g, {sc.to_string(), tau.name, "oracle"});
    for (int l = size - 1; l >= 0; --l) {  // column-major, reversed
        int lidx[2], jidx[2];
        g.decode(l, lidx);
        for (int j = size - 1; j >= 0; --j) {
            g.decode(j, jidx);
            oracle_detail::Binding wb;
            for (int d = 0; d < n; ++d) {
                // minimal image of the lattice difference (l-j) dx
                double w = (lidx[d] - jidx[d]) * (two_L / g.points_per_axis());
                wb.set(d, ws[d].c_str(), std::remainder(w, two_L));
            }
            oracle_detail::Binding vb;
            for (int d = 0; d < n; ++d)
                vb.set(d, xs[d].c_str(),
                       g.node(jidx[d]) + oracle_detail::tree_eval(tau.components[d], wb));
            oracle_detail::KahanSum sum_re, sum_im;
            for (int q = size - 1; q >= 0; --q) {
                int qidx[2];
                g.decode(q, qidx);
                double angle = 0.0;
                for (int d = 0; d < n; ++d) {
                    vb.set(n + d, ks[d].c_str(), g.frequency(qidx[d]));
                    angle += (g.node(jidx[d]) - g.node(lidx[d])) * g.frequency(qidx[d]);
                }
                Complex phase = std::polar(1.0, angle);
                Complex val(oracle_detail::tree_eval(sc.re, vb),
                            oracle_detail::tree_eval(sc.im, vb));
                if (std::isnan(val.real()) || std::isnan(val.imag()))
                    throw EvalError("non-finite summand in oracle assembly");
                Complex term = val * phase;
                sum_re.add(term.real());
                sum_im.add(term.imag());
            }
            A.mat(j, l) = Complex(sum_re.sum, sum_im.sum) * scale;
        }
    }
    return A;
}

// ---------------------------------------------------------------------------
// Application
// ---------------------------------------------------------------------------

inline GridFunction apply(const OperatorMatrix& A, const GridFunction& u) {
    if (!(A.grid == u.grid)) throw ValidationError("operator/function grid mismatch");
    Eigen::Map<const Eigen::VectorXcd> uv(u.values.data(), u.values.size());
    Eigen::VectorXcd vv = A.mat * uv;
    return GridFunction(u.grid, std::vector<Complex>(vv.data(), vv.data() + vv.size()));
}

// Kohn-Nirenberg fast path: v(x_j) = (2pi)^{-n} dxi^n sum_q e^{i x_j xi_q}
// sigma(x_j, xi_q) u^(xi_q); O(N^{2n}) after one dft.
inline GridFunction kn_fast_apply(const ComplexSymbol& sigma, const Grid& g,
                                  const GridFunction& u) {
    if (!(g == u.grid)) throw ValidationError("grid mismatch");
    const int n = g.dim();
    ComplexSymbol sc = sigma.canonicalized(n);
    auto slots = make_slots({x_names(n), k_names(n)});
    CompiledExpr cre = CompiledExpr::compile(sc.re, slots);
    CompiledExpr cim = CompiledExpr::compile(sc.im, slots);

    GridFunction uhat = dft(u);
    GridFunction out(g);
    double weight = 1.0;
    for (int d = 0; d < n; ++d) weight *= g.dxi() / (2.0 * M_PI);

    std::vector<double> vars(2 * n);
    double xpt[2], kpt[2];
    for (int j = 0; j < g.size(); ++j) {
        g.node_point(j, xpt);
        for (int d = 0; d < n; ++d) vars[d] = xpt[d];
        Complex acc(0, 0);
        for (int q = 0; q < g.size(); ++q) {
            g.frequency_point(q, kpt);
            double angle = 0.0;
            for (int d = 0; d < n; ++d) {
                vars[n + d] = kpt[d];
                angle += xpt[d] * kpt[d];
            }
            Complex val(cre.eval(vars), cim.eval(vars));
            acc += val * uhat.values[q] * std::polar(1.0, angle);
        }
        out.values[j] = acc * weight;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Matrix CSV: header + provenance comments, entries "re;im" with 17
// significant digits, comma-separated within a row.
// ---------------------------------------------------------------------------

inline void write_matrix_csv(const std::string& path, const OperatorMatrix& A) {
    std::ofstream f(path);
    if (!f) throw ValidationError("cannot open for writing: " + path);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "# operator N=%d grid n=%d N=%d L=%.17g\n",
                  static_cast<int>(A.mat.rows()), A.grid.dim(), A.grid.points_per_axis(),
                  A.grid.half_length());
    f << buf;
    if (!A.prov.symbol_text.empty()) f << "# symbol: " << A.prov.symbol_text << "\n";
    if (!A.prov.tau_name.empty()) f << "# tau: " << A.prov.tau_name << "\n";
    if (!A.prov.path.empty()) f << "# path: " << A.prov.path << "\n";
    for (Eigen::Index r = 0; r < A.mat.rows(); ++r) {
        std::string line;
        for (Eigen::Index c = 0; c < A.mat.cols(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g;%.17g", A.mat(r, c).real(), A.mat(r, c).imag());
            if (c) line += ",";
            line += buf;
        }
        f << line << "\n";
    }
    if (!f) throw ValidationError("write failed: " + path);
}

inline OperatorMatrix read_matrix_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot open for reading: " + path);
    std::string header;
    std::getline(f, header);
    int size = 0, n = 0, N = 0;
    double L = 0.0;
    if (std::sscanf(header.c_str(), "# operator N=%d grid n=%d N=%d L=%lf", &size, &n, &N, &L) != 4)
        throw ValidationError("bad operator header in " + path);
    Grid g(n, N, L);
    if (g.size() != size) throw ValidationError("inconsistent operator header in " + path);
    OperatorMatrix A(g);
    std::string line;
    int row = 0;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.rfind("# symbol: ", 0) == 0) A.prov.symbol_text = line.substr(10);
            if (line.rfind("# tau: ", 0) == 0) A.prov.tau_name = line.substr(7);
            if (line.rfind("# path: ", 0) == 0) A.prov.path = line.substr(8);
            continue;
        }
        if (row >= size) throw ValidationError("too many rows in " + path);
        std::size_t pos = 0;
        for (int c = 0; c < size; ++c) {
            double re = 0, im = 0;
            int consumed = 0;
            if (std::sscanf(line.c_str() + pos, "%lf;%lf%n", &re, &im, &consumed) != 2)
                throw ValidationError("bad operator row in " + path);
            A.mat(row, c) = Complex(re, im);
            pos += consumed;
            if (c + 1 < size) {
                if (line[pos] != ',') throw ValidationError("bad operator row in " + path);
                ++pos;
            }
        }
        ++row;
    }
    if (row != size) throw ValidationError("missing rows in " + path);
    return A;
}

}  // namespace tauq
