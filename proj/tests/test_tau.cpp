#include <catch2/catch_amalgamated.hpp>

#include "tauquant/sampling.hpp"
#include "tauquant/tau.hpp"

using namespace tauq;

namespace {

// pointwise comparison over a probe box
double max_component_difference(const QuantizingFunction& f, const QuantizingFunction& g,
                                double half = 5.0, int samples = 500) {
    REQUIRE(f.dim == g.dim);
    QuasiRandomSequence seq(f.dim);
    double worst = 0.0;
    for (int i = 0; i < samples; ++i) {
        auto p = seq.point_in_box(i, half);
        auto a = f(p), b = g(p);
        for (int d = 0; d < f.dim; ++d) worst = std::max(worst, std::abs(a[d] - b[d]));
    }
    return worst;
}

bool polynomial_equal(const QuantizingFunction& f, const QuantizingFunction& g) {
    auto pf = detail::tau_polynomials(f);
    auto pg = detail::tau_polynomials(g);
    REQUIRE(pf);
    REQUIRE(pg);
    for (int i = 0; i < f.dim; ++i)
        if (!((*pf)[i] - (*pg)[i]).is_zero()) return false;
    return true;
}

}  // namespace

TEST_CASE("presets") {
    auto weyl = make_preset(TauPreset::Weyl, 1);
    REQUIRE(weyl.components[0] == parse_expression("w/2"));
    auto kn2 = make_preset(TauPreset::Kn, 2);
    REQUIRE(kn2.components[0].is_constant(0.0));
    REQUIRE(kn2.components[1].is_constant(0.0));
    auto lin = make_linear(0.3, 1);
    REQUIRE(lin(std::vector<double>{10.0})[0] == Catch::Approx(3.0));
    REQUIRE_THROWS_AS(parse_tau_spec("unknown-preset-name", 1), Error);
}

TEST_CASE("tau(0) = 0 is enforced at construction") {
    REQUIRE_THROWS_AS(make_quantizing_function({parse_expression("w + 1")}), ValidationError);
    REQUIRE_NOTHROW(make_quantizing_function({parse_expression("sin(w)")}));
}

TEST_CASE("polynomial detection") {
    REQUIRE(make_preset(TauPreset::Weyl, 1).is_polynomial);
    REQUIRE(parse_tau_spec("w1/2, w2/2", 2).is_polynomial);
    REQUIRE_FALSE(parse_tau_spec("w/2 + 0.1*sin(w)", 1).is_polynomial);
    REQUIRE(parse_tau_spec("w1/2, w2/2, w3/2 + w1*w2/6", 3).is_polynomial);
}

TEST_CASE("dual quantizing function") {
    // dual(kn) = akn, dual(weyl) = weyl, dual(linear s) = linear (1-s)
    REQUIRE(polynomial_equal(dual(make_preset(TauPreset::Kn, 2)), make_preset(TauPreset::Akn, 2)));
    REQUIRE(polynomial_equal(dual(make_preset(TauPreset::Weyl, 1)),
                             make_preset(TauPreset::Weyl, 1)));
    // dyadic s: exact polynomial identity; non-dyadic s: pointwise to rounding
    REQUIRE(polynomial_equal(dual(make_linear(0.25, 1)), make_linear(0.75, 1)));
    REQUIRE(max_component_difference(dual(make_linear(0.3, 1)), make_linear(0.7, 1)) < 1e-15);
    REQUIRE(dual(make_preset(TauPreset::Kn, 1)).name == "akn");

    // involution, exactly in polynomial normal form
    auto lin = make_linear(0.3, 1);
    REQUIRE(polynomial_equal(dual(dual(lin)), lin));

    // involution pointwise for a nonlinear tau
    auto tau = parse_tau_spec("w/2 + 0.1*sin(w)", 1);
    REQUIRE(max_component_difference(dual(dual(tau)), tau) < 1e-12);
}

TEST_CASE("admissibility probing") {
    SECTION("all presets are order 0 with bounded derivatives") {
        for (auto preset : {TauPreset::Kn, TauPreset::Akn, TauPreset::Weyl}) {
            auto rep = check_admissible(make_preset(preset, 1), 5.0, 2000);
            REQUIRE(rep.mu_hat == 0.0);
            REQUIRE(rep.bounded_derivatives);
        }
        auto rep = check_admissible(make_linear(0.3, 1), 5.0, 2000);
        REQUIRE(rep.mu_hat == 0.0);
        REQUIRE(rep.bounded_derivatives);
    }
    SECTION("weyl is a Hadamard diffeomorphism with Jacobian 1/2") {
        auto rep = check_admissible(make_preset(TauPreset::Weyl, 1), 5.0, 2000);
        REQUIRE(rep.hadamard_ok);
        REQUIRE(rep.min_jacobian == Catch::Approx(0.5));
        REQUIRE(rep.tau0_residual == 0.0);
    }
    SECTION("perturbed weyl keeps min |J| in [0.4, 0.6]") {
        auto rep = check_admissible(parse_tau_spec("w/2 + 0.1*sin(w)", 1), 5.0, 2000);
        REQUIRE(rep.bounded_derivatives);
        REQUIRE(rep.min_jacobian >= 0.4 - 1e-12);
        REQUIRE(rep.min_jacobian <= 0.6 + 1e-12);
        REQUIRE(rep.hadamard_ok);
    }
    SECTION("w^2 fails the Hadamard probe (Jacobian vanishes at 0)") {
        auto rep = check_admissible(parse_tau_spec("w^2", 1), 5.0, 2000);
        REQUIRE(rep.tau0_residual == 0.0);
        REQUIRE_FALSE(rep.hadamard_ok);
        REQUIRE(rep.min_jacobian == 0.0);
    }
    REQUIRE_THROWS_AS(check_admissible(make_preset(TauPreset::Weyl, 1), 5.0, 10),
                      ValidationError);
}

TEST_CASE("taylor data") {
    SECTION("weyl, N = 2: c_(1) = 1/2 and zero remainder") {
        auto td = taylor(make_preset(TauPreset::Weyl, 1), 2);
        REQUIRE(td.coefficients.size() == 1);
        REQUIRE(td.coefficients[0].gamma == MultiIndex{1});
        REQUIRE((*td.coefficients[0].exact)[0] == Rational(1, 2));
        for (const auto& r : td.remainder) REQUIRE(r.c[0].is_constant(0.0));
    }
    SECTION("sin, N = 3: c_(1) = 1, c_(2) = 0") {
        auto td = taylor(make_quantizing_function({parse_expression("sin(w)")}), 3);
        REQUIRE(td.coefficients.size() == 2);
        REQUIRE(td.coefficients[0].value[0] == Catch::Approx(1.0));
        REQUIRE(td.coefficients[1].value[0] == Catch::Approx(0.0).margin(1e-15));
    }
    SECTION("Heisenberg pullback, N = 3: exact rationals 1/2,1/2,1/2,1/6") {
        auto tau = parse_tau_spec("w1/2, w2/2, w3/2 + w1*w2/6", 3);
        auto td = taylor(tau, 3);
        std::map<std::vector<int>, std::vector<Rational>> got;
        for (const auto& c : td.coefficients) got[c.gamma.e] = *c.exact;
        REQUIRE(got[{1, 0, 0}][0] == Rational(1, 2));
        REQUIRE(got[{0, 1, 0}][1] == Rational(1, 2));
        REQUIRE(got[{0, 0, 1}][2] == Rational(1, 2));
        REQUIRE(got[{1, 1, 0}][2] == Rational(1, 6));
        for (const auto& r : td.remainder)
            for (const auto& c : r.c) REQUIRE(c.is_constant(0.0));
    }
    SECTION("reconstruction on the probe box") {
        for (const char* spec : {"w/2", "sin(w)", "w/2 + 0.1*sin(w)", "tanh(w)"}) {
            auto tau = parse_tau_spec(spec, 1);
            for (int N : {1, 2, 3, 4}) {
                auto td = taylor(tau, N);
                QuasiRandomSequence seq(1);
                for (int i = 0; i < 200; ++i) {
                    auto p = seq.point_in_box(i, 5.0);
                    double got = td.reconstruct(p)[0];
                    double expect = tau(p)[0];
                    REQUIRE(std::abs(got - expect) <= 1e-9 * std::max(1.0, std::abs(expect)));
                }
            }
        }
        // the polynomial Heisenberg pullback reconstructs exactly
        auto tau = parse_tau_spec("w1/2, w2/2, w3/2 + w1*w2/6", 3);
        auto td = taylor(tau, 3);
        QuasiRandomSequence seq(3);
        for (int i = 0; i < 100; ++i) {
            auto p = seq.point_in_box(i, 5.0);
            auto got = td.reconstruct(p);
            auto expect = tau(p);
            for (int d = 0; d < 3; ++d)
                REQUIRE(std::abs(got[d] - expect[d]) <= 1e-12 * std::max(1.0, std::abs(expect[d])));
        }
    }
}

TEST_CASE("invert_tau_x") {
    SECTION("weyl inverts linearly: y = 2w - x") {
        auto weyl = make_preset(TauPreset::Weyl, 1);
        auto y = invert_tau_x(weyl, std::vector<double>{0.0}, std::vector<double>{1.0}, 1e-12);
        REQUIRE(y[0] == Catch::Approx(2.0).margin(1e-12));
        y = invert_tau_x(weyl, std::vector<double>{1.0}, std::vector<double>{2.5}, 1e-12);
        REQUIRE(y[0] == Catch::Approx(4.0).margin(1e-12));
    }
    SECTION("fixed point at w = x, exactly") {
        for (const char* spec : {"weyl", "akn", "w/2 + 0.1*sin(w)"}) {
            auto tau = parse_tau_spec(spec, 1);
            auto y = invert_tau_x(tau, std::vector<double>{0.7}, std::vector<double>{0.7}, 1e-12);
            REQUIRE(y[0] == 0.7);
        }
    }
    SECTION("Newton residual check") {
        auto tau = parse_tau_spec("w/2 + 0.1*sin(w)", 1);
        auto y = invert_tau_x(tau, std::vector<double>{0.0}, std::vector<double>{0.6}, 1e-12);
        double resid = std::abs(0.0 + tau(std::vector<double>{y[0]})[0] - 0.6);
        REQUIRE(resid <= 1e-12);
    }
    SECTION("round trips") {
        auto tau = parse_tau_spec("w/2 + 0.1*sin(w)", 1);
        QuasiRandomSequence seq(2);
        for (int i = 0; i < 200; ++i) {
            auto p = seq.point_in_box(i, 3.0);
            std::vector<double> x{p[0]}, w{p[1]};
            auto y = invert_tau_x(tau, x, w, 1e-13);
            // forward: tau_x(y) == w
            double fwd = x[0] + tau(std::vector<double>{y[0] - x[0]})[0];
            REQUIRE(std::abs(fwd - w[0]) <= 1e-13);
            // backward: invert(tau_x(y0)) == y0 within 10 tol
            std::vector<double> y0{p[1] * 0.5};
            double w0 = x[0] + tau(std::vector<double>{y0[0] - x[0]})[0];
            auto back = invert_tau_x(tau, x, std::vector<double>{w0}, 1e-13);
            REQUIRE(std::abs(back[0] - y0[0]) <= 1e-12);
        }
    }
    SECTION("2-dimensional inversion") {
        auto tau = parse_tau_spec("w1/2 + 0.05*sin(w2), w2/2 + 0.05*sin(w1)", 2);
        std::vector<double> x{0.3, -0.2}, w{0.9, 0.4};
        auto y = invert_tau_x(tau, x, w, 1e-12);
        auto t = tau(std::vector<double>{y[0] - x[0], y[1] - x[1]});
        REQUIRE(std::abs(x[0] + t[0] - w[0]) <= 1e-12);
        REQUIRE(std::abs(x[1] + t[1] - w[1]) <= 1e-12);
    }
}
