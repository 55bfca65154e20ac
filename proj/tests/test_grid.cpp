#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "tauquant/grid.hpp"
#include "tauquant/sampling.hpp"

using namespace tauq;

namespace {

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

TEST_CASE("grid validation and geometry") {
    REQUIRE_THROWS_AS(Grid(3, 16, 1.0), ValidationError);
    REQUIRE_THROWS_AS(Grid(1, 15, 1.0), ValidationError);
    REQUIRE_THROWS_AS(Grid(1, 4, 1.0), ValidationError);
    Grid g(1, 16, M_PI);
    REQUIRE(g.dx() * g.dxi() * g.points_per_axis() == Catch::Approx(2 * M_PI));
    REQUIRE(g.node(0) == -M_PI);
    REQUIRE(g.frequency(8) == 0.0);
    // odd minimal image with symmetric ties
    REQUIRE(g.wrap_difference(M_PI) == M_PI);
    REQUIRE(g.wrap_difference(-M_PI) == -M_PI);
    REQUIRE(g.wrap_difference(1.5 * M_PI) == Catch::Approx(-0.5 * M_PI));
    REQUIRE(g.wrap_difference(0.25) == 0.25);
}

TEST_CASE("dft of the basic modes") {
    Grid g(1, 32, M_PI);
    SECTION("constant -> 2pi at the zero mode") {
        GridFunction u(g);
        for (auto& v : u.values) v = 1.0;
        GridFunction uhat = dft(u);
        for (int q = 0; q < g.size(); ++q) {
            double expect = g.frequency(q) == 0.0 ? 2 * M_PI : 0.0;
            REQUIRE(std::abs(uhat.values[q] - expect) < 1e-12);
        }
    }
    SECTION("e^{ix} -> 2pi at mode 1") {
        GridFunction u(g);
        for (int j = 0; j < g.size(); ++j) u.values[j] = std::polar(1.0, g.node(j));
        GridFunction uhat = dft(u);
        for (int q = 0; q < g.size(); ++q) {
            double expect = g.frequency(q) == 1.0 ? 2 * M_PI : 0.0;
            REQUIRE(std::abs(uhat.values[q] - expect) < 1e-11);
        }
    }
}

TEST_CASE("round trip, Parseval, conjugate symmetry") {
    for (int dim : {1, 2}) {
        Grid g(dim, dim == 1 ? 64 : 16, dim == 1 ? M_PI : 2.0);
        GridFunction u = random_function(g, 7);
        REQUIRE(max_diff(idft(dft(u)), u) < 1e-12);

        // Parseval: dx^n sum |u|^2 = (2pi)^{-n} dxi^n sum |uhat|^2
        GridFunction uhat = dft(u);
        double lhs = 0.0, rhs = 0.0;
        for (const auto& v : u.values) lhs += std::norm(v);
        for (const auto& v : uhat.values) rhs += std::norm(v);
        for (int d = 0; d < dim; ++d) {
            lhs *= g.dx();
            rhs *= g.dxi() / (2 * M_PI);
        }
        REQUIRE(lhs == Catch::Approx(rhs).epsilon(1e-10));
    }

    // real u: uhat(-xi) = conj(uhat(xi)) for paired frequencies
    Grid g(1, 32, 2.0);
    GridFunction u(g);
    SeededRng rng(3);
    for (auto& v : u.values) v = Complex(rng.uniform(-1, 1), 0.0);
    GridFunction uhat = dft(u);
    const int N = g.points_per_axis();
    for (int q = 1; q < N; ++q) {  // q = 0 is the unpaired Nyquist index
        int qneg = N - q;          // frequency(-q index)
        REQUIRE(std::abs(uhat.values[qneg % N] - std::conj(uhat.values[q])) < 1e-12);
    }
}

TEST_CASE("band-limited quadrature exactness") {
    Grid g(1, 32, M_PI);
    SeededRng rng(11);
    // modes strictly inside the band
    std::vector<std::pair<int, Complex>> modes;
    for (int m : {-7, -2, 0, 3, 9})
        modes.emplace_back(m, Complex(rng.uniform(-1, 1), rng.uniform(-1, 1)));
    GridFunction u(g);
    for (int j = 0; j < g.size(); ++j) {
        Complex acc(0, 0);
        for (auto& [m, c] : modes) acc += c * std::polar(1.0, m * g.node(j));
        u.values[j] = acc;
    }
    GridFunction uhat = dft(u);
    for (int q = 0; q < g.size(); ++q) {
        Complex expect(0, 0);
        for (auto& [m, c] : modes)
            if (g.frequency(q) == static_cast<double>(m)) expect = 2 * M_PI * c;
        REQUIRE(std::abs(uhat.values[q] - expect) <= 1e-12 * (2 * M_PI));
    }
}

TEST_CASE("sobolev norms") {
    Grid g(1, 64, M_PI);
    SECTION("constant: ||1||_{L^2} = sqrt(2pi)") {
        GridFunction u(g);
        for (auto& v : u.values) v = 1.0;
        REQUIRE(sobolev_norm(u, 0.0) == Catch::Approx(std::sqrt(2 * M_PI)));
    }
    SECTION("single mode: ||e^{ix}||_{H^1} = 2 sqrt(pi)") {
        GridFunction u(g);
        for (int j = 0; j < g.size(); ++j) u.values[j] = std::polar(1.0, g.node(j));
        REQUIRE(sobolev_norm(u, 1.0) == Catch::Approx(2 * std::sqrt(M_PI)));
    }
    SECTION("s = 0 equals the dx-weighted l2 norm") {
        GridFunction u = random_function(g, 5);
        double direct = 0.0;
        for (const auto& v : u.values) direct += std::norm(v);
        direct = std::sqrt(g.dx() * direct);
        REQUIRE(sobolev_norm(u, 0.0) == Catch::Approx(direct).epsilon(1e-10));
    }
    SECTION("nondecreasing in s") {
        GridFunction u = random_function(g, 9);
        double prev = 0.0;
        for (double s : {-2.0, -1.0, 0.0, 0.5, 1.0, 2.0}) {
            double cur = sobolev_norm(u, s);
            REQUIRE(cur >= prev);
            prev = cur;
        }
    }
}

TEST_CASE("grid function csv round trip") {
    Grid g(2, 8, 1.5);
    GridFunction u = random_function(g, 21);
    auto path = std::filesystem::temp_directory_path() / "tauq_gf_test.csv";
    write_grid_function_csv(path.string(), u);
    GridFunction v = read_grid_function_csv(path.string());
    REQUIRE(v.grid == g);
    REQUIRE(max_diff(u, v) == 0.0);  // 17 significant digits round-trip exactly
    std::filesystem::remove(path);
}
