#include <catch2/catch_amalgamated.hpp>

#include "tauquant/expr.hpp"
#include "tauquant/sampling.hpp"

using namespace tauq;

namespace {

double fd_derivative(const SymbolExpr& e, const VariableBinding& at, const std::string& var,
                     double h = 1e-5) {
    VariableBinding lo = at, hi = at;
    lo[var] -= h;
    hi[var] += h;
    return (e.eval(hi) - e.eval(lo)) / (2.0 * h);
}

}  // namespace

TEST_CASE("parser produces the grammar-forced tree") {
    SymbolExpr e = parse_expression("x + 2*k^2");
    SymbolExpr expected =
        SymbolExpr::variable("x") +
        SymbolExpr::constant(2.0) * SymbolExpr::pow(SymbolExpr::variable("k"), 2.0);
    REQUIRE(e == expected);

    // precedence and associativity
    REQUIRE(parse_expression("a - b - c") ==
            parse_expression("(a - b) - c"));
    REQUIRE(parse_expression("a / b / c") == parse_expression("(a / b) / c"));
    REQUIRE(parse_expression("2^3^2").value() == Catch::Approx(512.0));  // right-assoc, folded
    REQUIRE(parse_expression("-x^2") == SymbolExpr::pow(-SymbolExpr::variable("x"), 2.0));
}

TEST_CASE("trivial evaluations") {
    REQUIRE(parse_expression("jb(k)").eval({{"k", 0.0}}) == 1.0);
    REQUIRE(parse_expression("jb(k1,k2)").eval({{"k1", 0.0}, {"k2", 0.0}}) == 1.0);
    REQUIRE(parse_expression("sin(x)*cos(k)").eval({{"x", M_PI / 2}, {"k", 0.0}}) == 1.0);
    REQUIRE(parse_expression("k^2").eval({{"k", 3.0}}) == 9.0);
    REQUIRE(parse_expression("exp(x)-1").eval({{"x", 0.0}}) == 0.0);
    REQUIRE(parse_expression("pi").value() == Catch::Approx(M_PI));
    REQUIRE_THROWS_AS(parse_expression("2e"), ParseError);  // dangling exponent marker
}

TEST_CASE("parse errors carry byte offsets") {
    try {
        parse_expression("x + @");
        FAIL("expected ParseError");
    } catch (const ParseError& err) {
        REQUIRE(err.offset == 4);
    }
    REQUIRE_THROWS_AS(parse_expression("foo(x)"), ParseError);   // unknown function
    REQUIRE_THROWS_AS(parse_expression("sin(x"), ParseError);    // missing paren
    REQUIRE_THROWS_AS(parse_expression("1 + "), ParseError);
}

TEST_CASE("evaluation errors") {
    REQUIRE_THROWS_AS(parse_expression("x + y").eval({{"x", 1.0}}), EvalError);
    REQUIRE_THROWS_AS(parse_expression("log(x)").eval({{"x", -1.0}}), EvalError);
    REQUIRE_THROWS_AS(parse_expression("sqrt(x)").eval({{"x", -1.0}}), EvalError);
    REQUIRE_THROWS_AS(parse_expression("x^0.5").eval({{"x", -2.0}}), EvalError);
    REQUIRE_THROWS_AS(parse_expression("1/x").eval({{"x", 0.0}}), EvalError);
}

TEST_CASE("derivatives of the basic rules") {
    SymbolExpr k = SymbolExpr::variable("k");
    REQUIRE(parse_expression("k^2").diff("k") == SymbolExpr::constant(2.0) * k);
    REQUIRE(parse_expression("sin(x)").diff("k") == SymbolExpr::constant(0.0));
    // d/dx jb(x) = x / jb(x)
    SymbolExpr d = parse_expression("jb(x)").diff("x");
    for (double x : {-2.0, -0.5, 0.0, 1.0, 3.0}) {
        double expect = x / std::sqrt(1.0 + x * x);
        REQUIRE(d.eval({{"x", x}}) == Catch::Approx(expect).margin(1e-15));
    }
    REQUIRE_THROWS_AS(parse_expression("x^k").diff("x"), DiffError);
}

TEST_CASE("derivatives agree with central finite differences") {
    const char* exprs[] = {
        "sin(x)*cos(k) + x^3",      "exp(-((k/4)^2))*x",       "jb(x,k)",
        "tanh(x)+atan(k)",          "x/(1+k^2)",             "sqrt(1+x^2)*sin(k)",
        "log(2+x^2)",               "(2+sin(x))*(1+k^2)",
    };
    QuasiRandomSequence seq(2);
    for (const char* text : exprs) {
        SymbolExpr e = parse_expression(text);
        SymbolExpr dx = e.diff("x");
        SymbolExpr dk = e.diff("k");
        for (int i = 0; i < 100; ++i) {
            auto p = seq.point_in_box(i, 2.0);
            VariableBinding b{{"x", p[0]}, {"k", p[1]}};
            auto check = [&](const std::string& var, const SymbolExpr& sym) {
                double exact = sym.eval(b);
                double approx = fd_derivative(e, b, var);
                double scale = std::max(1.0, std::abs(exact));
                REQUIRE(std::abs(exact - approx) / scale < 1e-6);
            };
            check("x", dx);
            check("k", dk);
        }
    }
}

TEST_CASE("substitute composes with evaluation") {
    SymbolExpr e = parse_expression("x*k");
    SymbolExpr weyl_arg = parse_expression("x + (y-x)/2");
    SymbolExpr s = e.substitute({{"x", weyl_arg}});
    REQUIRE(s == weyl_arg * SymbolExpr::variable("k"));

    REQUIRE(parse_expression("sin(x)")
                .substitute({{"x", SymbolExpr::constant(0.0)}})
                .is_constant(0.0));

    // substitute-then-eval equals eval under the composed binding
    QuasiRandomSequence seq(3);
    SymbolExpr f = parse_expression("sin(x)*k + jb(x,k)/(2+x^2)");
    SymbolExpr g = parse_expression("y^2 - 1");
    SymbolExpr fs = f.substitute({{"x", g}});
    for (int i = 0; i < 50; ++i) {
        auto p = seq.point_in_box(i, 3.0);
        VariableBinding b{{"y", p[0]}, {"k", p[1]}};
        VariableBinding composed{{"x", g.eval(b)}, {"k", p[1]}};
        double lhs = fs.eval(b);
        double rhs = f.eval(composed);
        REQUIRE(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));
    }

    // simultaneous substitution does not chain
    SymbolExpr sim = parse_expression("x + y").substitute(
        {{"x", SymbolExpr::variable("y")}, {"y", SymbolExpr::variable("x")}});
    REQUIRE(sim == parse_expression("y + x"));
}

TEST_CASE("print/parse round trip is idempotent") {
    const char* corpus[] = {
        "x + 2*k^2",
        "-x^2",
        "-(x^2)",
        "x^-2",
        "sin(x)*cos(k)/(1+k^2)",
        "jb(k1,k2) - 0.25*x1",
        "2^3^2",
        "x - (y - k)",
        "x/(y*k)",
        "(x+y)^3*(1-k)",
        "ramp((jb(k)-2)/2)",
        "1.5e-3*x + pi",
    };
    for (const char* text : corpus) {
        SymbolExpr once = parse_expression(text);
        SymbolExpr twice = parse_expression(once.to_string());
        REQUIRE(twice == once);
        REQUIRE(parse_expression(twice.to_string()) == twice);
    }
}

TEST_CASE("compiled evaluation matches tree evaluation") {
    auto e = parse_expression("sin(x)*jb(k) + x^3/(2+k^2) - ramp(x)");
    auto c = CompiledExpr::compile(e, {{"x", 0}, {"k", 1}});
    QuasiRandomSequence seq(2);
    for (int i = 0; i < 200; ++i) {
        auto p = seq.point_in_box(i, 3.0);
        REQUIRE(c.eval(p) == e.eval({{"x", p[0]}, {"k", p[1]}}));
    }
    REQUIRE_THROWS_AS(CompiledExpr::compile(parse_expression("z"), {{"x", 0}}), ValidationError);
}

TEST_CASE("ramp cutoff family") {
    auto r = parse_expression("ramp(t)");
    REQUIRE(r.eval({{"t", -1.0}}) == 0.0);
    REQUIRE(r.eval({{"t", 2.0}}) == 1.0);
    REQUIRE(r.eval({{"t", 0.5}}) == Catch::Approx(0.5));
    auto d = r.diff("t");
    REQUIRE(d.eval({{"t", -1.0}}) == 0.0);
    REQUIRE(d.eval({{"t", 0.5}}) == Catch::Approx(1.5));  // 6t(1-t)
    // zero cutoff factor annihilates a singular chain factor
    auto chi = parse_expression("ramp((sqrt(k^2)-1)/1)");
    auto dchi = chi.diff("k");
    REQUIRE(dchi.eval({{"k", 0.0}}) == 0.0);
}
