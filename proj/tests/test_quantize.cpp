#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "tauquant/quantize.hpp"
#include "tauquant/sampling.hpp"

using namespace tauq;

namespace {

GridFunction mode(const Grid& g, int m) {
    GridFunction u(g);
    for (int j = 0; j < g.size(); ++j) u.values[j] = std::polar(1.0, m * g.node(j));
    return u;
}

GridFunction random_function(const Grid& g, std::uint64_t seed) {
    SeededRng rng(seed);
    GridFunction u(g);
    for (auto& v : u.values) v = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
    return u;
}

double max_diff(const GridFunction& a, const GridFunction& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        m = std::max(m, std::abs(a.values[i] - b.values[i]));
    return m;
}

}  // namespace

TEST_CASE("normalization: the constant 1 is quantized into the identity") {
    for (const char* spec : {"kn", "akn", "weyl", "linear:0.3", "w/2 + 0.1*sin(w)"}) {
        Grid g(1, 32, M_PI);
        auto A = op_symbol(ComplexSymbol::parse("1"), parse_tau_spec(spec, 1), g);
        REQUIRE((A.mat - Eigen::MatrixXcd::Identity(g.size(), g.size())).cwiseAbs().maxCoeff() <=
                1e-12);
    }
    // and in dimension 2
    Grid g2(2, 10, 2.0);
    auto A2 = op_symbol(ComplexSymbol::parse("1"), make_preset(TauPreset::Weyl, 2), g2);
    REQUIRE((A2.mat - Eigen::MatrixXcd::Identity(g2.size(), g2.size())).cwiseAbs().maxCoeff() <=
            1e-12);
}

TEST_CASE("fourier mode is an eigenfunction of the frequency symbol") {
    Grid g(1, 32, M_PI);
    auto A = op_symbol(ComplexSymbol::parse("k"), make_preset(TauPreset::Kn, 1), g);
    GridFunction u = mode(g, 1);
    GridFunction v = apply(A, u);
    REQUIRE(max_diff(v, u) < 1e-10);
}

TEST_CASE("multiplier symbols do not depend on tau") {
    Grid g(1, 16, 2.0);
    ComplexSymbol sigma = ComplexSymbol::parse("jb(k)/(1+k^2)", "k/(2+k^2)");
    auto A = op_symbol(sigma, make_preset(TauPreset::Kn, 1), g);
    auto B = op_symbol(sigma, make_preset(TauPreset::Weyl, 1), g);
    auto C = op_symbol(sigma, parse_tau_spec("w/2 + 0.1*sin(w)", 1), g);
    REQUIRE((A.mat - B.mat).cwiseAbs().maxCoeff() == 0.0);  // identical summands
    REQUIRE((A.mat - C.mat).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("weyl quantization of a real symbol is hermitian") {
    Grid g(1, 32, M_PI);
    auto A = op_symbol(ComplexSymbol::parse("cos(x) + k^2/(1+k^2)"),
                       make_preset(TauPreset::Weyl, 1), g);
    REQUIRE((A.mat - A.mat.adjoint()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("linearity of assembly") {
    Grid g(1, 16, M_PI);
    auto tau = make_preset(TauPreset::Weyl, 1);
    ComplexSymbol s1 = ComplexSymbol::parse("sin(x)/(1+k^2)");
    ComplexSymbol s2 = ComplexSymbol::parse("cos(x)*k");
    double a = 2.25, b = -0.5;
    ComplexSymbol combined{SymbolExpr::constant(a) * s1.re + SymbolExpr::constant(b) * s2.re,
                           SymbolExpr::constant(a) * s1.im + SymbolExpr::constant(b) * s2.im};
    auto A = op_symbol(combined, tau, g);
    auto B = op_symbol(s1, tau, g);
    auto C = op_symbol(s2, tau, g);
    REQUIRE((A.mat - (a * B.mat + b * C.mat)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("amplitude assembly") {
    Grid g(1, 16, M_PI);
    SECTION("tau-substituted amplitude equals op_symbol (same summand)") {
        ComplexSymbol sigma = ComplexSymbol::parse("sin(x)*exp(-((k/4)^2))", "x/(1+k^2)");
        for (const char* spec : {"kn", "weyl", "w/2 + 0.1*sin(w)"}) {
            auto tau = parse_tau_spec(spec, 1);
            auto A = op_symbol(sigma, tau, g);
            auto B = op_amplitude(amplitude_of_symbol(sigma, tau), g, DiffConvention::Wrapped);
            REQUIRE((A.mat - B.mat).cwiseAbs().maxCoeff() <= 1e-14);
        }
    }
    SECTION("x-only amplitude is the multiplication operator") {
        auto A = op_amplitude(ComplexSymbol::parse("sin(x)"), g);
        Eigen::MatrixXcd D = Eigen::MatrixXcd::Zero(g.size(), g.size());
        for (int j = 0; j < g.size(); ++j) D(j, j) = std::sin(g.node(j));
        REQUIRE((A.mat - D).cwiseAbs().maxCoeff() <= 1e-12);
    }
    SECTION("separable amplitude factorizes as diag(f) M_h diag(g)") {
        auto A = op_amplitude(ComplexSymbol::parse("sin(x)*cos(y)*exp(-((k/4)^2))"), g);
        auto M = op_amplitude(ComplexSymbol::parse("exp(-((k/4)^2))"), g);
        Eigen::MatrixXcd F = Eigen::MatrixXcd::Zero(g.size(), g.size());
        Eigen::MatrixXcd G = Eigen::MatrixXcd::Zero(g.size(), g.size());
        for (int j = 0; j < g.size(); ++j) {
            F(j, j) = std::sin(g.node(j));
            G(j, j) = std::cos(g.node(j));
        }
        REQUIRE((A.mat - F * M.mat * G).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("oracle equivalence") {
    SeededRng rng(123);
    const char* taus[] = {"kn", "akn", "weyl", "linear:0.7", "w/2 + 0.1*sin(w)"};
    for (int trial = 0; trial < 8; ++trial) {
        int N = 8 + 4 * static_cast<int>(rng.uniform_int(0, 4));
        double L = rng.uniform(1.0, 4.0);
        Grid g(1, N, L);
        double w1 = rng.uniform(0.5, 2.0), w2 = rng.uniform(0.5, 2.0), s = rng.uniform(2.0, 6.0);
        char buf[160];
        std::snprintf(buf, sizeof(buf), "sin(%.3f*x)*exp(-((k/%.3f)^2)) + cos(%.3f*x)/(2+k^2)", w1,
                      s, w2);
        ComplexSymbol sigma = ComplexSymbol::parse(buf, "cos(x)*k/(4+k^2)");
        auto tau = parse_tau_spec(taus[trial % 5], 1);
        auto A = op_symbol(sigma, tau, g);
        auto B = op_oracle(sigma, tau, g);
        REQUIRE((A.mat - B.mat).cwiseAbs().maxCoeff() <= 1e-10);
    }
    SECTION("sigma = 1 oracle identity") {
        Grid g(1, 16, 2.0);
        auto B = op_oracle(ComplexSymbol::parse("1"), make_preset(TauPreset::Weyl, 1), g);
        REQUIRE((B.mat - Eigen::MatrixXcd::Identity(g.size(), g.size())).cwiseAbs().maxCoeff() <=
                1e-12);
    }
}

TEST_CASE("apply matches direct kernel summation") {
    Grid g(1, 16, M_PI);
    auto A = op_symbol(ComplexSymbol::parse("sin(x)*exp(-((k/3)^2))"),
                       make_preset(TauPreset::Weyl, 1), g);
    GridFunction u = random_function(g, 77);
    GridFunction v = apply(A, u);
    for (int j = 0; j < g.size(); ++j) {
        Complex acc(0, 0);
        for (int l = 0; l < g.size(); ++l) acc += A.mat(j, l) * u.values[l];
        REQUIRE(std::abs(acc - v.values[j]) <= 1e-12);
    }
}

TEST_CASE("kn fast apply") {
    Grid g(1, 32, M_PI);
    SECTION("sigma = 1 is the identity") {
        GridFunction u = random_function(g, 5);
        REQUIRE(max_diff(kn_fast_apply(ComplexSymbol::parse("1"), g, u), u) <= 1e-12);
    }
    SECTION("k^2 on e^{ix} has eigenvalue 1") {
        GridFunction u = mode(g, 1);
        REQUIRE(max_diff(kn_fast_apply(ComplexSymbol::parse("k^2"), g, u), u) <= 1e-10);
    }
    SECTION("matches the assembled kn operator") {
        ComplexSymbol sigma = ComplexSymbol::parse("jb(k)*(1+0.5*sin(x))");
        auto A = op_symbol(sigma, make_preset(TauPreset::Kn, 1), g);
        GridFunction u = random_function(g, 31);
        REQUIRE(max_diff(kn_fast_apply(sigma, g, u), apply(A, u)) <= 1e-10);
    }
}

TEST_CASE("assembly is deterministic across thread counts") {
    Grid g(1, 16, 2.0);
    ComplexSymbol sigma = ComplexSymbol::parse("sin(x)*jb(k)", "cos(x)/(1+k^2)");
    auto tau = parse_tau_spec("w/2 + 0.1*sin(w)", 1);
    auto A1 = op_symbol(sigma, tau, g, 1);
    auto A4 = op_symbol(sigma, tau, g, 4);
    REQUIRE((A1.mat - A4.mat).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("operator csv round trip") {
    Grid g(1, 8, 1.0);
    auto A = op_symbol(ComplexSymbol::parse("sin(x)", "k"), make_preset(TauPreset::Weyl, 1), g);
    auto path = std::filesystem::temp_directory_path() / "tauq_op_test.csv";
    write_matrix_csv(path.string(), A);
    auto B = read_matrix_csv(path.string());
    REQUIRE(B.grid == g);
    REQUIRE((A.mat - B.mat).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(B.prov.path == "standard");
    std::filesystem::remove(path);
}

TEST_CASE("dimension mismatches are rejected") {
    Grid g(1, 16, 1.0);
    REQUIRE_THROWS_AS(op_symbol(ComplexSymbol::parse("1"), make_preset(TauPreset::Weyl, 2), g),
                      ValidationError);
    Grid g2(2, 8, 1.0);
    GridFunction u(g);
    auto A = op_symbol(ComplexSymbol::parse("1"), make_preset(TauPreset::Weyl, 2), g2);
    REQUIRE_THROWS_AS(apply(A, u), ValidationError);
}
