#include <catch2/catch_amalgamated.hpp>

#include "tauquant/estimates.hpp"
#include "tauquant/sampling.hpp"

using namespace tauq;

TEST_CASE("operator norm") {
    Grid g(1, 16, 1.0);
    SECTION("identity and scaling") {
        Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(16, 16);
        REQUIRE(operator_norm(I).norm == Catch::Approx(1.0).epsilon(1e-10));
        REQUIRE(operator_norm(Eigen::MatrixXcd(2.0 * I)).norm ==
                Catch::Approx(2.0).epsilon(1e-10));
    }
    SECTION("power iteration agrees with the full decomposition") {
        SeededRng rng(8);
        for (int trial = 0; trial < 5; ++trial) {
            Eigen::MatrixXcd A(20, 20);
            for (int i = 0; i < 20; ++i)
                for (int j = 0; j < 20; ++j)
                    A(i, j) = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
            auto p = operator_norm(A, "power-iteration");
            auto f = operator_norm(A, "full-decomposition");
            REQUIRE(p.norm == Catch::Approx(f.norm).epsilon(1e-7));
            REQUIRE(p.residual <= 1e-8);
        }
    }
    SECTION("norm of the adjoint equals the norm") {
        SeededRng rng(9);
        Eigen::MatrixXcd A(12, 12);
        for (int i = 0; i < 12; ++i)
            for (int j = 0; j < 12; ++j) A(i, j) = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
        REQUIRE(std::abs(operator_norm(A).norm - operator_norm(Eigen::MatrixXcd(A.adjoint())).norm) <=
                1e-10);
    }
    SECTION("unknown method") {
        REQUIRE_THROWS_AS(operator_norm(Eigen::MatrixXcd::Identity(4, 4), "qr"), ValidationError);
    }
}

TEST_CASE("cv derivative-sup probe") {
    SECTION("constant amplitude: M = 1") {
        auto rep = cv_bound(ComplexSymbol::parse("1"), 1, M_PI, M_PI, M_PI, 512);
        REQUIRE(rep.m_val == 1.0);
        for (const auto& e : rep.table)
            if (e.alpha.order() + e.beta.order() + e.gamma.order() > 0) REQUIRE(e.sup == 0.0);
    }
    SECTION("homogeneity is exact under power-of-two scaling") {
        ComplexSymbol a = ComplexSymbol::parse("sin(x)*cos(y)*exp(-((k/3)^2))", "x/(1+k^2+y^2)");
        ComplexSymbol scaled{SymbolExpr::constant(4.0) * a.re, SymbolExpr::constant(4.0) * a.im};
        auto r1 = cv_bound(a, 1, 2.0, 2.0, 8.0, 1024);
        auto r2 = cv_bound(scaled, 1, 2.0, 2.0, 8.0, 1024);
        REQUIRE(r2.m_val == 4.0 * r1.m_val);
        for (std::size_t i = 0; i < r1.table.size(); ++i)
            REQUIRE(r2.table[i].sup == 4.0 * r1.table[i].sup);
    }
    SECTION("product of sines has every derivative sup equal to 1") {
        auto rep = cv_bound(ComplexSymbol::parse("sin(x)*sin(y)*sin(k)"), 1, M_PI, M_PI, M_PI,
                            20000);
        REQUIRE(rep.m_val == Catch::Approx(1.0).margin(1e-3));
        for (const auto& e : rep.table) REQUIRE(e.sup <= 1.0 + 1e-12);
    }
    SECTION("the (sigma, tau) form reports tau derivative sups up to order 4n+2") {
        auto rep = cv_bound_symbol(ComplexSymbol::parse("sin(x)/(1+k^2)"),
                                   parse_tau_spec("w/2 + 0.1*sin(w)", 1), 2.0, 2.0, 4.0, 512);
        REQUIRE(rep.tau_derivative_sups);
        REQUIRE(rep.tau_derivative_sups->size() == 6);  // orders 1..6 in dimension 1
        REQUIRE((*rep.tau_derivative_sups)[0].second <= 0.6 + 1e-9);
        REQUIRE((*rep.tau_derivative_sups)[0].second >= 0.4 - 1e-9);
    }
}

TEST_CASE("ellipticity probe") {
    SECTION("1 + k^2 at order 2 has C close to 1/2") {
        auto C = ellipticity(ComplexSymbol::parse("1 + k^2"), 1, 2.0, 0.0, M_PI, 16.0, 8192);
        REQUIRE(C);
        REQUIRE(*C >= 0.5 - 1e-3);
        REQUIRE(*C <= 1.0);
    }
    SECTION("jb(k)^2 behaves identically") {
        auto C = ellipticity(ComplexSymbol::parse("jb(k)^2"), 1, 2.0, 0.0, M_PI, 16.0, 8192);
        REQUIRE(C);
        REQUIRE(*C >= 0.5 - 1e-3);
        REQUIRE(*C <= 1.0);
    }
    SECTION("sin(x) is not elliptic") {
        REQUIRE_FALSE(ellipticity(ComplexSymbol::parse("sin(x)"), 1, 0.0, 0.0, M_PI, 8.0, 4096));
    }
}

TEST_CASE("garding fit") {
    Grid g(1, 32, M_PI);
    SECTION("sigma = 1 at order 0: C1 = 1/2, C2 = 0") {
        auto rep = garding_check(ComplexSymbol::parse("1"), make_preset(TauPreset::Weyl, 1), 0.0,
                                 -1.0, g);
        REQUIRE(rep.fit_ok);
        REQUIRE(rep.C1 == Catch::Approx(0.5).epsilon(1e-8));
        REQUIRE(rep.C2 <= 1e-10);
        REQUIRE(rep.min_eig_verification >= -1e-9 * std::max(1.0, rep.verification_scale));
    }
    SECTION("multiplier 1 + k^2 at m = 1: C1 = 1/2 exactly, C2 = 0") {
        auto rep = garding_check(ComplexSymbol::parse("1 + k^2"), make_preset(TauPreset::Weyl, 1),
                                 1.0, 0.0, g);
        REQUIRE(rep.fit_ok);
        REQUIRE(rep.C1 >= 0.25);
        REQUIRE(rep.C1 <= 0.5 + 1e-9);
        REQUIRE(rep.C2 <= 1.0);
    }
    SECTION("(2+sin x)(1+k^2) at m = 1, s = 0 fits with C1 > 0.1") {
        auto rep = garding_check(ComplexSymbol::parse("(2+sin(x))*(1+k^2)"),
                                 make_preset(TauPreset::Weyl, 1), 1.0, 0.0, g);
        REQUIRE(rep.fit_ok);
        REQUIRE(rep.C1 >= 0.1);
        REQUIRE(rep.min_eig_verification >= -1e-8 * std::max(1.0, rep.verification_scale));
    }
    SECTION("requires s < m") {
        REQUIRE_THROWS_AS(garding_check(ComplexSymbol::parse("1"),
                                        make_preset(TauPreset::Weyl, 1), 0.0, 0.0, g),
                          ValidationError);
    }
}
