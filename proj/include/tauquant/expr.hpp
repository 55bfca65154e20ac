#pragma once

// Small real-valued expression language: parse, print, evaluate, differentiate,
// substitute. Trees are immutable and cheap to share; construction applies
// constant folding and 0/1 elimination but no further simplification.

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tauquant/errors.hpp"

namespace tauq {

enum class ExprKind { Constant, Variable, Add, Mul, Div, Pow, Neg, Call };

enum class Func : int {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Atan,
    Tanh,
    Jb,      // jb(v1,..,vm) = sqrt(1 + v1^2 + .. + vm^2)
    Ramp,    // C^1 cutoff ramp: 0 for t<=0, 3t^2-2t^3 on (0,1), 1 for t>=1
    RampD1,  // derivatives of the ramp (RampD3 is piecewise constant)
    RampD2,
    RampD3,
};

namespace detail {

struct FuncInfo {
    const char* name;
    int min_arity;  // -1 in max_arity means variadic
    int max_arity;
};

inline const FuncInfo& func_info(Func f) {
    static const FuncInfo table[] = {
        {"sin", 1, 1},  {"cos", 1, 1},     {"tan", 1, 1},     {"exp", 1, 1},
        {"log", 1, 1},  {"sqrt", 1, 1},    {"atan", 1, 1},    {"tanh", 1, 1},
        {"jb", 1, -1},  {"ramp", 1, 1},    {"ramp_d1", 1, 1}, {"ramp_d2", 1, 1},
        {"ramp_d3", 1, 1},
    };
    return table[static_cast<int>(f)];
}

inline bool lookup_func(std::string_view name, Func& out) {
    for (int i = 0; i <= static_cast<int>(Func::RampD3); ++i) {
        if (name == func_info(static_cast<Func>(i)).name) {
            out = static_cast<Func>(i);
            return true;
        }
    }
    return false;
}

inline double ramp_eval(double t, int deriv) {
    if (t <= 0.0 || t >= 1.0) return (deriv == 0 && t >= 1.0) ? 1.0 : 0.0;
    switch (deriv) {
        case 0: return t * t * (3.0 - 2.0 * t);
        case 1: return 6.0 * t * (1.0 - t);
        case 2: return 6.0 - 12.0 * t;
        default: return -12.0;
    }
}

inline double powi(double base, long long n) {
    if (n < 0) {
        if (base == 0.0) throw EvalError("pow of zero with negative exponent");
        return 1.0 / powi(base, -n);
    }
    double r = 1.0, b = base;
    while (n > 0) {
        if (n & 1) r *= b;
        b *= b;
        n >>= 1;
    }
    return r;
}

inline double apply_func(Func f, std::span<const double> a) {
    switch (f) {
        case Func::Sin: return std::sin(a[0]);
        case Func::Cos: return std::cos(a[0]);
        case Func::Tan: return std::tan(a[0]);
        case Func::Exp: return std::exp(a[0]);
        case Func::Log:
            if (a[0] <= 0.0) throw EvalError("log of non-positive value");
            return std::log(a[0]);
        case Func::Sqrt:
            if (a[0] < 0.0) throw EvalError("sqrt of negative value");
            return std::sqrt(a[0]);
        case Func::Atan: return std::atan(a[0]);
        case Func::Tanh: return std::tanh(a[0]);
        case Func::Jb: {
            double s = 1.0;
            for (double v : a) s += v * v;
            return std::sqrt(s);
        }
        case Func::Ramp: return ramp_eval(a[0], 0);
        case Func::RampD1: return ramp_eval(a[0], 1);
        case Func::RampD2: return ramp_eval(a[0], 2);
        case Func::RampD3: return ramp_eval(a[0], 3);
    }
    throw EvalError("unknown function");
}

inline double eval_pow(double base, double expo) {
    double r = std::rint(expo);
    if (r == expo && std::abs(expo) <= 1024.0) return powi(base, static_cast<long long>(r));
    if (base < 0.0) throw EvalError("pow of negative base with non-integer exponent");
    if (base == 0.0 && expo <= 0.0) throw EvalError("pow of zero with non-positive exponent");
    return std::pow(base, expo);
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    // shorten when a lower precision round-trips
    for (int prec = 1; prec <= 16; ++prec) {
        char alt[40];
        std::snprintf(alt, sizeof(alt), "%.*g", prec, v);
        double back = 0.0;
        std::sscanf(alt, "%lf", &back);
        if (back == v) return alt;
    }
    return buf;
}

}  // namespace detail

// Binding of variable names to values; every free variable of an expression
// must be bound before evaluation.
using VariableBinding = std::map<std::string, double, std::less<>>;

class SymbolExpr {
    struct Node {
        ExprKind kind;
        double value = 0.0;     // Constant
        std::string name;       // Variable
        Func func = Func::Sin;  // Call
        std::vector<SymbolExpr> args;
    };
    using NodePtr = std::shared_ptr<const Node>;

public:
    SymbolExpr() : SymbolExpr(constant(0.0)) {}

    static SymbolExpr constant(double v) {
        Node n;
        n.kind = ExprKind::Constant;
        n.value = v;
        return SymbolExpr(std::make_shared<Node>(std::move(n)));
    }

    static SymbolExpr variable(std::string name) {
        Node n;
        n.kind = ExprKind::Variable;
        n.name = std::move(name);
        return SymbolExpr(std::make_shared<Node>(std::move(n)));
    }

    static SymbolExpr add(SymbolExpr a, SymbolExpr b) {
        if (a.is_constant() && b.is_constant()) {
            double v = a.value() + b.value();
            if (std::isfinite(v)) return constant(v);
        }
        if (a.is_constant(0.0)) return b;
        if (b.is_constant(0.0)) return a;
        return make(ExprKind::Add, {std::move(a), std::move(b)});
    }

    static SymbolExpr sub(SymbolExpr a, SymbolExpr b) {
        if (a == b) return constant(0.0);
        return add(std::move(a), neg(std::move(b)));
    }

    static SymbolExpr mul(SymbolExpr a, SymbolExpr b) {
        if (a.is_constant() && b.is_constant()) {
            double v = a.value() * b.value();
            if (std::isfinite(v)) return constant(v);
        }
        if (a.is_constant(0.0) || b.is_constant(0.0)) return constant(0.0);
        if (a.is_constant(1.0)) return b;
        if (b.is_constant(1.0)) return a;
        return make(ExprKind::Mul, {std::move(a), std::move(b)});
    }

    static SymbolExpr div(SymbolExpr a, SymbolExpr b) {
        if (b.is_constant(1.0)) return a;
        if (a.is_constant(0.0) && !b.is_constant(0.0)) return constant(0.0);
        if (a.is_constant() && b.is_constant() && b.value() != 0.0) {
            double v = a.value() / b.value();
            if (std::isfinite(v)) return constant(v);
        }
        return make(ExprKind::Div, {std::move(a), std::move(b)});
    }

    static SymbolExpr neg(SymbolExpr a) {
        if (a.is_constant()) return constant(-a.value());
        if (a.kind() == ExprKind::Neg) return a.arg(0);
        return make(ExprKind::Neg, {std::move(a)});
    }

    static SymbolExpr pow(SymbolExpr base, SymbolExpr expo) {
        if (expo.is_constant(1.0)) return base;
        if (expo.is_constant(0.0)) return constant(1.0);
        if (base.is_constant() && expo.is_constant()) {
            try {
                double v = detail::eval_pow(base.value(), expo.value());
                if (std::isfinite(v)) return constant(v);
            } catch (const EvalError&) {
                // leave unfolded, evaluation will report the domain error
            }
        }
        return make(ExprKind::Pow, {std::move(base), std::move(expo)});
    }

    static SymbolExpr pow(SymbolExpr base, double expo) { return pow(std::move(base), constant(expo)); }

    static SymbolExpr call(Func f, std::vector<SymbolExpr> args) {
        const auto& info = detail::func_info(f);
        int argc = static_cast<int>(args.size());
        if (argc < info.min_arity || (info.max_arity >= 0 && argc > info.max_arity))
            throw ValidationError(std::string(info.name) + ": wrong argument count");
        bool all_const = true;
        for (const auto& a : args) all_const = all_const && a.is_constant();
        if (all_const) {
            std::vector<double> vals;
            vals.reserve(args.size());
            for (const auto& a : args) vals.push_back(a.value());
            try {
                double v = detail::apply_func(f, vals);
                if (std::isfinite(v)) return constant(v);
            } catch (const EvalError&) {
            }
        }
        Node n;
        n.kind = ExprKind::Call;
        n.func = f;
        n.args = std::move(args);
        return SymbolExpr(std::make_shared<Node>(std::move(n)));
    }

    static SymbolExpr call(std::string_view name, std::vector<SymbolExpr> args) {
        Func f;
        if (!detail::lookup_func(name, f))
            throw ValidationError("unknown function name: " + std::string(name));
        return call(f, std::move(args));
    }

    // --- inspection ---

    // stable identity of the shared node; construction shares subtrees, so
    // this is what turns compiled trees into DAGs
    const void* node_identity() const { return n_.get(); }

    ExprKind kind() const { return n_->kind; }
    double value() const { return n_->value; }
    const std::string& var_name() const { return n_->name; }
    Func func() const { return n_->func; }
    int arg_count() const { return static_cast<int>(n_->args.size()); }
    const SymbolExpr& arg(int i) const { return n_->args[i]; }

    bool is_constant() const { return n_->kind == ExprKind::Constant; }
    bool is_constant(double v) const { return is_constant() && n_->value == v; }

    bool operator==(const SymbolExpr& o) const {
        if (n_ == o.n_) return true;
        if (n_->kind != o.n_->kind) return false;
        switch (n_->kind) {
            case ExprKind::Constant: return n_->value == o.n_->value;
            case ExprKind::Variable: return n_->name == o.n_->name;
            case ExprKind::Call:
                if (n_->func != o.n_->func) return false;
                break;
            default: break;
        }
        if (n_->args.size() != o.n_->args.size()) return false;
        for (std::size_t i = 0; i < n_->args.size(); ++i)
            if (!(n_->args[i] == o.n_->args[i])) return false;
        return true;
    }

    std::size_t node_count() const {
        std::size_t c = 1;
        for (const auto& a : n_->args) c += a.node_count();
        return c;
    }

    void collect_variables(std::set<std::string>& out) const {
        if (n_->kind == ExprKind::Variable) out.insert(n_->name);
        for (const auto& a : n_->args) a.collect_variables(out);
    }

    std::set<std::string> free_variables() const {
        std::set<std::string> s;
        collect_variables(s);
        return s;
    }

    bool depends_on(std::string_view var) const {
        if (n_->kind == ExprKind::Variable) return n_->name == var;
        for (const auto& a : n_->args)
            if (a.depends_on(var)) return true;
        return false;
    }

    // --- evaluation ---
    //
    // An exact zero factor annihilates a product without evaluating the other
    // factor's finiteness, so cutoff-style products (ramp derivative times a
    // locally singular chain factor) are evaluable where the cutoff vanishes.
    // Division by zero yields NaN and is reported by the final finiteness
    // check unless annihilated.

    double eval(const VariableBinding& b) const {
        double v = eval_impl(b);
        if (std::isnan(v)) throw EvalError("non-finite result (division by zero?)");
        return v;
    }

    double eval_impl(const VariableBinding& b) const {
        switch (n_->kind) {
            case ExprKind::Constant: return n_->value;
            case ExprKind::Variable: {
                auto it = b.find(n_->name);
                if (it == b.end()) throw EvalError("unbound variable: " + n_->name);
                return it->second;
            }
            case ExprKind::Add: return arg(0).eval_impl(b) + arg(1).eval_impl(b);
            case ExprKind::Mul: {
                double lhs = arg(0).eval_impl(b);
                if (lhs == 0.0) return 0.0;
                double rhs = arg(1).eval_impl(b);
                return rhs == 0.0 ? 0.0 : lhs * rhs;
            }
            case ExprKind::Div: {
                double den = arg(1).eval_impl(b);
                if (den == 0.0) return std::numeric_limits<double>::quiet_NaN();
                return arg(0).eval_impl(b) / den;
            }
            case ExprKind::Pow: return detail::eval_pow(arg(0).eval_impl(b), arg(1).eval_impl(b));
            case ExprKind::Neg: return -arg(0).eval_impl(b);
            case ExprKind::Call: {
                std::vector<double> vals(n_->args.size());
                for (std::size_t i = 0; i < n_->args.size(); ++i) vals[i] = n_->args[i].eval_impl(b);
                return detail::apply_func(n_->func, vals);
            }
        }
        throw EvalError("corrupt expression");
    }

    // --- differentiation ---

    SymbolExpr diff(std::string_view var) const {
        switch (n_->kind) {
            case ExprKind::Constant: return constant(0.0);
            case ExprKind::Variable: return constant(n_->name == var ? 1.0 : 0.0);
            case ExprKind::Add: return add(arg(0).diff(var), arg(1).diff(var));
            case ExprKind::Neg: return neg(arg(0).diff(var));
            case ExprKind::Mul:
                return add(mul(arg(0).diff(var), arg(1)), mul(arg(0), arg(1).diff(var)));
            case ExprKind::Div: {
                // (u'v - uv') / v^2
                const auto& u = arg(0);
                const auto& v = arg(1);
                return div(sub(mul(u.diff(var), v), mul(u, v.diff(var))), pow(v, constant(2.0)));
            }
            case ExprKind::Pow: {
                const auto& base = arg(0);
                const auto& expo = arg(1);
                if (!expo.is_constant())
                    throw DiffError("cannot differentiate pow with non-constant exponent");
                if (!base.depends_on(var)) return constant(0.0);
                double c = expo.value();
                // c*u^(c-1)*u'; for non-integer c this is the exp/log rewrite,
                // valid for positive base (enforced at evaluation)
                return mul(mul(constant(c), pow(base, constant(c - 1.0))), base.diff(var));
            }
            case ExprKind::Call: return diff_call(var);
        }
        throw DiffError("corrupt expression");
    }

    // --- substitution (simultaneous, capture-free) ---

    SymbolExpr substitute(const std::map<std::string, SymbolExpr>& subst) const {
        switch (n_->kind) {
            case ExprKind::Constant: return *this;
            case ExprKind::Variable: {
                auto it = subst.find(n_->name);
                return it == subst.end() ? *this : it->second;
            }
            default: {
                bool touched = false;
                std::vector<SymbolExpr> args;
                args.reserve(n_->args.size());
                for (const auto& a : n_->args) {
                    args.push_back(a.substitute(subst));
                    touched = touched || !(args.back() == a);
                }
                if (!touched) return *this;
                switch (n_->kind) {
                    case ExprKind::Add: return add(args[0], args[1]);
                    case ExprKind::Mul: return mul(args[0], args[1]);
                    case ExprKind::Div: return div(args[0], args[1]);
                    case ExprKind::Pow: return pow(args[0], args[1]);
                    case ExprKind::Neg: return neg(args[0]);
                    case ExprKind::Call: return call(n_->func, std::move(args));
                    default: break;
                }
            }
        }
        throw Error("corrupt expression");
    }

    SymbolExpr rename_variable(const std::string& from, const std::string& to) const {
        if (from == to) return *this;
        return substitute({{from, variable(to)}});
    }

    // --- printing ---

    std::string to_string() const { return print(1); }

private:
    explicit SymbolExpr(NodePtr n) : n_(std::move(n)) {}

    static SymbolExpr make(ExprKind kind, std::vector<SymbolExpr> args) {
        Node n;
        n.kind = kind;
        n.args = std::move(args);
        return SymbolExpr(std::make_shared<Node>(std::move(n)));
    }

    SymbolExpr diff_call(std::string_view var) const {
        const auto& args = n_->args;
        auto chain = [&](SymbolExpr outer) { return mul(std::move(outer), args[0].diff(var)); };
        const SymbolExpr& u = args[0];
        switch (n_->func) {
            case Func::Sin: return chain(call(Func::Cos, {u}));
            case Func::Cos: return chain(neg(call(Func::Sin, {u})));
            case Func::Tan: return chain(div(constant(1.0), pow(call(Func::Cos, {u}), 2.0)));
            case Func::Exp: return chain(call(Func::Exp, {u}));
            case Func::Log: return chain(div(constant(1.0), u));
            case Func::Sqrt: return chain(div(constant(0.5), call(Func::Sqrt, {u})));
            case Func::Atan: return chain(div(constant(1.0), add(constant(1.0), pow(u, 2.0))));
            case Func::Tanh:
                return chain(sub(constant(1.0), pow(call(Func::Tanh, {u}), 2.0)));
            case Func::Jb: {
                // d jb = (sum a_i a_i') / jb
                SymbolExpr num = constant(0.0);
                for (const auto& a : args) num = add(num, mul(a, a.diff(var)));
                return div(num, *this);
            }
            case Func::Ramp: return chain(call(Func::RampD1, {u}));
            case Func::RampD1: return chain(call(Func::RampD2, {u}));
            case Func::RampD2: return chain(call(Func::RampD3, {u}));
            case Func::RampD3: return constant(0.0);  // a.e.
        }
        throw DiffError("unknown function");
    }

    // precedence: Add 1, Mul/Div 2, Neg 3, Pow 4, atoms 5
    static int prec(const SymbolExpr& e) {
        switch (e.kind()) {
            case ExprKind::Add: return 1;
            case ExprKind::Mul:
            case ExprKind::Div: return 2;
            case ExprKind::Neg: return 3;
            case ExprKind::Pow: return 4;
            default: return 5;
        }
    }

    std::string print(int min_prec) const {
        std::string s;
        switch (n_->kind) {
            case ExprKind::Constant:
                s = detail::format_double(n_->value);
                if (n_->value < 0.0 && min_prec > 3) s = "(" + s + ")";
                return s;
            case ExprKind::Variable: return n_->name;
            case ExprKind::Add: {
                const auto& rhs = arg(1);
                if (rhs.kind() == ExprKind::Neg)
                    s = arg(0).print(1) + " - " + rhs.arg(0).print(2);
                else if (rhs.is_constant() && rhs.value() < 0.0)
                    s = arg(0).print(1) + " - " + detail::format_double(-rhs.value());
                else
                    s = arg(0).print(1) + " + " + rhs.print(2);
                break;
            }
            case ExprKind::Mul: s = arg(0).print(2) + " * " + arg(1).print(3); break;
            case ExprKind::Div: s = arg(0).print(2) + " / " + arg(1).print(3); break;
            case ExprKind::Neg: s = "-" + arg(0).print(5); break;
            case ExprKind::Pow: s = arg(0).print(5) + "^" + arg(1).print(4); break;
            case ExprKind::Call: {
                s = detail::func_info(n_->func).name;
                s += "(";
                for (int i = 0; i < arg_count(); ++i) {
                    if (i) s += ", ";
                    s += arg(i).print(1);
                }
                s += ")";
                return s;
            }
        }
        if (prec(*this) < min_prec) s = "(" + s + ")";
        return s;
    }

    NodePtr n_;
};

inline SymbolExpr operator+(const SymbolExpr& a, const SymbolExpr& b) { return SymbolExpr::add(a, b); }
inline SymbolExpr operator-(const SymbolExpr& a, const SymbolExpr& b) { return SymbolExpr::sub(a, b); }
inline SymbolExpr operator*(const SymbolExpr& a, const SymbolExpr& b) { return SymbolExpr::mul(a, b); }
inline SymbolExpr operator/(const SymbolExpr& a, const SymbolExpr& b) { return SymbolExpr::div(a, b); }
inline SymbolExpr operator-(const SymbolExpr& a) { return SymbolExpr::neg(a); }

// ---------------------------------------------------------------------------
// Parser. Grammar:
//   expr   := term (("+"|"-") term)*
//   term   := factor (("*"|"/") factor)*
//   factor := unary ("^" factor)?          -- "^" right-associative
//   unary  := "-" unary | atom
//   atom   := number | ident | ident "(" expr ("," expr)* ")" | "(" expr ")"
// `pi` and `e` are constants; any other identifier is an open-vocabulary
// variable (bindings are checked at evaluation time).
// ---------------------------------------------------------------------------

namespace detail {

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    SymbolExpr run() {
        SymbolExpr e = parse_expr();
        skip_ws();
        if (pos_ != text_.size()) throw ParseError(pos_, "unexpected trailing input");
        return e;
    }

private:
    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    SymbolExpr parse_expr() {
        SymbolExpr e = parse_term();
        for (;;) {
            if (eat('+'))
                e = SymbolExpr::add(e, parse_term());
            else if (eat('-'))
                e = SymbolExpr::sub(e, parse_term());
            else
                return e;
        }
    }

    SymbolExpr parse_term() {
        SymbolExpr e = parse_factor();
        for (;;) {
            if (eat('*'))
                e = SymbolExpr::mul(e, parse_factor());
            else if (eat('/'))
                e = SymbolExpr::div(e, parse_factor());
            else
                return e;
        }
    }

    SymbolExpr parse_factor() {
        SymbolExpr base = parse_unary();
        if (eat('^')) return SymbolExpr::pow(base, parse_factor());
        return base;
    }

    SymbolExpr parse_unary() {
        if (eat('-')) return SymbolExpr::neg(parse_unary());
        return parse_atom();
    }

    SymbolExpr parse_atom() {
        skip_ws();
        if (pos_ >= text_.size()) throw ParseError(pos_, "unexpected end of input");
        char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
        if (c == '(') {
            ++pos_;
            SymbolExpr e = parse_expr();
            if (!eat(')')) throw ParseError(pos_, "expected ')'");
            return e;
        }
        throw ParseError(pos_, std::string("unexpected character '") + c + "'");
    }

    SymbolExpr parse_number() {
        std::size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        if (pos_ < text_.size() && text_[pos_] == '.') {
            ++pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        }
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t mark = pos_;
            ++pos_;
            if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
            if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
                    ++pos_;
            } else {
                pos_ = mark;  // "e" belongs to the next token
            }
        }
        std::string tok(text_.substr(start, pos_ - start));
        if (tok == "." || tok.empty()) throw ParseError(start, "malformed number");
        char* end = nullptr;
        double v = std::strtod(tok.c_str(), &end);
        if (end != tok.c_str() + tok.size()) throw ParseError(start, "malformed number");
        return SymbolExpr::constant(v);
    }

    SymbolExpr parse_ident() {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        std::string name(text_.substr(start, pos_ - start));
        if (peek() == '(') {
            Func f;
            if (!lookup_func(name, f)) throw ParseError(start, "unknown function name: " + name);
            eat('(');
            std::vector<SymbolExpr> args;
            args.push_back(parse_expr());
            while (eat(',')) args.push_back(parse_expr());
            if (!eat(')')) throw ParseError(pos_, "expected ')'");
            return SymbolExpr::call(f, std::move(args));
        }
        if (name == "pi") return SymbolExpr::constant(M_PI);
        if (name == "e") return SymbolExpr::constant(M_E);
        return SymbolExpr::variable(std::move(name));
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline SymbolExpr parse_expression(std::string_view text) { return detail::Parser(text).run(); }

// ---------------------------------------------------------------------------
// Compiled form: a register program over a fixed variable-slot layout.
// Shared subtrees compile once (the trees produced by diff/substitute reuse
// nodes heavily), so evaluation cost is proportional to the number of unique
// nodes. Operator assembly loops evaluate these with a reused scratch buffer.
// ---------------------------------------------------------------------------

class CompiledExpr {
    enum class Op : std::uint8_t { Const, Var, Add, Mul, Div, Neg, PowI, PowC, PowVar, Call };
    struct Ins {
        Op op;
        std::int32_t dst = 0;
        std::int32_t a = 0;      // operand register / var slot / integer exponent
        std::int32_t b = 0;      // second operand register / call arg offset
        std::int32_t argc = 0;   // call arity
        double c = 0.0;          // constant / exponent
        Func fn = Func::Sin;
    };

public:
    CompiledExpr() = default;

    static CompiledExpr compile(const SymbolExpr& e, const std::map<std::string, int>& slots) {
        CompiledExpr ce;
        std::map<const void*, std::int32_t> memo;
        ce.root_ = ce.emit(e, slots, memo);
        return ce;
    }

    double eval(std::span<const double> vars) const {
        std::vector<double> scratch;
        return eval(vars, scratch);
    }

    double eval(std::span<const double> vars, std::vector<double>& scratch) const {
        if (static_cast<int>(scratch.size()) < nregs_) scratch.resize(nregs_);
        double* r = scratch.data();
        for (const Ins& ins : code_) {
            switch (ins.op) {
                case Op::Const: r[ins.dst] = ins.c; break;
                case Op::Var: r[ins.dst] = vars[ins.a]; break;
                case Op::Add: r[ins.dst] = r[ins.a] + r[ins.b]; break;
                case Op::Mul:
                    // zero annihilates (see SymbolExpr::eval)
                    r[ins.dst] = (r[ins.a] == 0.0 || r[ins.b] == 0.0) ? 0.0 : r[ins.a] * r[ins.b];
                    break;
                case Op::Div:
                    r[ins.dst] = r[ins.b] == 0.0 ? std::numeric_limits<double>::quiet_NaN()
                                                 : r[ins.a] / r[ins.b];
                    break;
                case Op::Neg: r[ins.dst] = -r[ins.a]; break;
                case Op::PowI: r[ins.dst] = detail::powi(r[ins.a], ins.b); break;
                case Op::PowC: r[ins.dst] = detail::eval_pow(r[ins.a], ins.c); break;
                case Op::PowVar: r[ins.dst] = detail::eval_pow(r[ins.a], r[ins.b]); break;
                case Op::Call: {
                    double args[kMaxCallArgs];
                    for (int i = 0; i < ins.argc; ++i) args[i] = r[call_args_[ins.b + i]];
                    r[ins.dst] =
                        detail::apply_func(ins.fn, std::span<const double>(args, ins.argc));
                    break;
                }
            }
        }
        double v = r[root_];
        if (std::isnan(v)) throw EvalError("non-finite result (division by zero?)");
        return v;
    }

    int register_count() const { return nregs_; }

private:
    static constexpr int kMaxCallArgs = 16;

    std::int32_t emit(const SymbolExpr& e, const std::map<std::string, int>& slots,
                      std::map<const void*, std::int32_t>& memo) {
        auto it = memo.find(e.node_identity());
        if (it != memo.end()) return it->second;
        Ins ins;
        switch (e.kind()) {
            case ExprKind::Constant:
                ins.op = Op::Const;
                ins.c = e.value();
                break;
            case ExprKind::Variable: {
                auto slot = slots.find(e.var_name());
                if (slot == slots.end())
                    throw ValidationError("variable not allowed here: " + e.var_name());
                ins.op = Op::Var;
                ins.a = slot->second;
                break;
            }
            case ExprKind::Add:
            case ExprKind::Mul:
            case ExprKind::Div:
                ins.op = e.kind() == ExprKind::Add ? Op::Add
                         : e.kind() == ExprKind::Mul ? Op::Mul
                                                     : Op::Div;
                ins.a = emit(e.arg(0), slots, memo);
                ins.b = emit(e.arg(1), slots, memo);
                break;
            case ExprKind::Neg:
                ins.op = Op::Neg;
                ins.a = emit(e.arg(0), slots, memo);
                break;
            case ExprKind::Pow: {
                const auto& expo = e.arg(1);
                ins.a = emit(e.arg(0), slots, memo);
                if (expo.is_constant()) {
                    double v = expo.value();
                    if (v == std::rint(v) && std::abs(v) <= 1024.0) {
                        ins.op = Op::PowI;
                        ins.b = static_cast<std::int32_t>(v);
                    } else {
                        ins.op = Op::PowC;
                        ins.c = v;
                    }
                } else {
                    ins.op = Op::PowVar;
                    ins.b = emit(expo, slots, memo);
                }
                break;
            }
            case ExprKind::Call: {
                if (e.arg_count() > kMaxCallArgs)
                    throw ValidationError("too many call arguments to compile");
                ins.op = Op::Call;
                ins.fn = e.func();
                ins.argc = e.arg_count();
                std::vector<std::int32_t> arg_regs;
                for (int i = 0; i < e.arg_count(); ++i)
                    arg_regs.push_back(emit(e.arg(i), slots, memo));
                ins.b = static_cast<std::int32_t>(call_args_.size());
                call_args_.insert(call_args_.end(), arg_regs.begin(), arg_regs.end());
                break;
            }
        }
        ins.dst = nregs_++;
        code_.push_back(ins);
        memo.emplace(e.node_identity(), ins.dst);
        return ins.dst;
    }

    std::vector<Ins> code_;
    std::vector<std::int32_t> call_args_;
    std::int32_t root_ = 0;
    int nregs_ = 0;
};

}  // namespace tauq
