#pragma once

// Multivariate polynomials with exact rational coefficients. Used for the
// Taylor data of polynomial quantizing functions and for the exact factor
// expansions of the term coefficients.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tauquant/expr.hpp"
#include "tauquant/multi_index.hpp"
#include "tauquant/rational.hpp"

namespace tauq {

class MultiPoly {
public:
    explicit MultiPoly(int dim = 1) : dim_(dim) {}

    static MultiPoly constant(int dim, const Rational& c) {
        MultiPoly p(dim);
        if (!c.is_zero()) p.terms_[std::vector<int>(dim, 0)] = c;
        return p;
    }

    static MultiPoly monomial(int dim, int axis, const Rational& c = Rational(1)) {
        MultiPoly p(dim);
        std::vector<int> e(dim, 0);
        e[axis] = 1;
        if (!c.is_zero()) p.terms_[e] = c;
        return p;
    }

    int dim() const { return dim_; }
    bool is_zero() const { return terms_.empty(); }

    bool is_constant() const {
        if (terms_.empty()) return true;
        return terms_.size() == 1 && terms_.begin()->first == std::vector<int>(dim_, 0);
    }

    Rational constant_value() const {
        if (terms_.empty()) return Rational(0);
        auto it = terms_.find(std::vector<int>(dim_, 0));
        return it == terms_.end() ? Rational(0) : it->second;
    }

    int total_degree() const {
        int d = 0;
        for (const auto& [e, c] : terms_) {
            int s = 0;
            for (int v : e) s += v;
            d = std::max(d, s);
        }
        return d;
    }

    Rational coefficient(const MultiIndex& mi) const {
        auto it = terms_.find(mi.e);
        return it == terms_.end() ? Rational(0) : it->second;
    }

    const std::map<std::vector<int>, Rational>& terms() const { return terms_; }

    void set_coefficient(const std::vector<int>& e, const Rational& c) {
        if (c.is_zero())
            terms_.erase(e);
        else
            terms_[e] = c;
    }

    void add_term(const std::vector<int>& e, const Rational& c) {
        auto it = terms_.find(e);
        if (it == terms_.end()) {
            if (!c.is_zero()) terms_[e] = c;
            return;
        }
        it->second += c;
        if (it->second.is_zero()) terms_.erase(it);
    }

    friend MultiPoly operator+(const MultiPoly& a, const MultiPoly& b) {
        MultiPoly r = a;
        for (const auto& [e, c] : b.terms_) r.add_term(e, c);
        return r;
    }

    friend MultiPoly operator-(const MultiPoly& a, const MultiPoly& b) {
        MultiPoly r = a;
        for (const auto& [e, c] : b.terms_) r.add_term(e, -c);
        return r;
    }

    MultiPoly operator-() const {
        MultiPoly r(dim_);
        for (const auto& [e, c] : terms_) r.terms_[e] = -c;
        return r;
    }

    friend MultiPoly operator*(const MultiPoly& a, const MultiPoly& b) {
        MultiPoly r(a.dim_);
        for (const auto& [ea, ca] : a.terms_)
            for (const auto& [eb, cb] : b.terms_) {
                std::vector<int> e(a.dim_);
                for (int i = 0; i < a.dim_; ++i) e[i] = ea[i] + eb[i];
                r.add_term(e, ca * cb);
            }
        return r;
    }

    MultiPoly scaled(const Rational& c) const {
        MultiPoly r(dim_);
        if (c.is_zero()) return r;
        for (const auto& [e, k] : terms_) r.terms_[e] = k * c;
        return r;
    }

    MultiPoly pow(int n) const {
        if (n < 0) throw ValidationError("negative polynomial power");
        MultiPoly r = constant(dim_, Rational(1));
        for (int i = 0; i < n; ++i) r = r * *this;
        return r;
    }

    double eval(std::span<const double> x) const {
        double s = 0.0;
        for (const auto& [e, c] : terms_) {
            double m = c.to_double();
            for (int i = 0; i < dim_; ++i) m *= detail::powi(x[i], e[i]);
            s += m;
        }
        return s;
    }

    Rational eval_rational(std::span<const Rational> x) const {
        Rational s(0);
        for (const auto& [e, c] : terms_) {
            Rational m = c;
            for (int i = 0; i < dim_; ++i)
                for (int k = 0; k < e[i]; ++k) m *= x[i];
            s += m;
        }
        return s;
    }

    // Substitute axis i -> -axis i (reflection through the origin).
    MultiPoly reflected() const {
        MultiPoly r(dim_);
        for (const auto& [e, c] : terms_) {
            int s = 0;
            for (int v : e) s += v;
            r.terms_[e] = (s % 2 == 0) ? c : -c;
        }
        return r;
    }

    SymbolExpr to_expr(std::span<const std::string> var_names) const {
        SymbolExpr s = SymbolExpr::constant(0.0);
        for (const auto& [e, c] : terms_) {
            SymbolExpr m = SymbolExpr::constant(c.to_double());
            for (int i = 0; i < dim_; ++i) {
                if (e[i] == 0) continue;
                SymbolExpr v = SymbolExpr::variable(var_names[i]);
                m = m * (e[i] == 1 ? v : SymbolExpr::pow(v, static_cast<double>(e[i])));
            }
            s = s + m;
        }
        return s;
    }

    std::string to_string(std::span<const std::string> var_names) const {
        if (terms_.empty()) return "0";
        std::string s;
        for (const auto& [e, c] : terms_) {
            if (!s.empty()) s += " + ";
            std::string mono = c.to_string();
            for (int i = 0; i < dim_; ++i) {
                if (e[i] == 0) continue;
                mono += "*" + std::string(var_names[i]);
                if (e[i] > 1) mono += "^" + std::to_string(e[i]);
            }
            s += mono;
        }
        return s;
    }

    // Converts an expression into polynomial normal form over the named
    // variables; nullopt if the expression is not a polynomial in them.
    static std::optional<MultiPoly> from_expr(const SymbolExpr& e,
                                              const std::map<std::string, int>& axes, int dim) {
        switch (e.kind()) {
            case ExprKind::Constant: {
                try {
                    return constant(dim, Rational::from_double(e.value()));
                } catch (const NumericalError&) {
                    return std::nullopt;
                }
            }
            case ExprKind::Variable: {
                auto it = axes.find(e.var_name());
                if (it == axes.end()) return std::nullopt;
                return monomial(dim, it->second);
            }
            case ExprKind::Add: {
                auto a = from_expr(e.arg(0), axes, dim);
                auto b = from_expr(e.arg(1), axes, dim);
                if (!a || !b) return std::nullopt;
                return *a + *b;
            }
            case ExprKind::Mul: {
                auto a = from_expr(e.arg(0), axes, dim);
                auto b = from_expr(e.arg(1), axes, dim);
                if (!a || !b) return std::nullopt;
                return *a * *b;
            }
            case ExprKind::Div: {
                auto a = from_expr(e.arg(0), axes, dim);
                auto b = from_expr(e.arg(1), axes, dim);
                if (!a || !b || !b->is_constant() || b->constant_value().is_zero())
                    return std::nullopt;
                return a->scaled(Rational(1) / b->constant_value());
            }
            case ExprKind::Neg: {
                auto a = from_expr(e.arg(0), axes, dim);
                if (!a) return std::nullopt;
                return -*a;
            }
            case ExprKind::Pow: {
                const auto& expo = e.arg(1);
                if (!expo.is_constant()) return std::nullopt;
                double v = expo.value();
                if (v != std::rint(v) || v < 0.0 || v > 64.0) return std::nullopt;
                auto a = from_expr(e.arg(0), axes, dim);
                if (!a) return std::nullopt;
                return a->pow(static_cast<int>(v));
            }
            case ExprKind::Call: return std::nullopt;
        }
        return std::nullopt;
    }

private:
    int dim_;
    std::map<std::vector<int>, Rational> terms_;
};

}  // namespace tauq
