// End-to-end checks of the tauquant binary: spec'd invocations, exit codes,
// output formats, and byte-level determinism. The binary path arrives as
// argv[1] from ctest.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "tauquant/quantize.hpp"

namespace fs = std::filesystem;

namespace {

int failures = 0;

void check(bool ok, const std::string& what) {
    std::cout << (ok ? "ok " : "FAIL ") << what << "\n";
    if (!ok) ++failures;
}

struct RunResult {
    int exit_code = -1;
    std::string stdout_text;
};

RunResult run(const std::string& bin, const std::string& args, const fs::path& dir) {
    fs::path out = dir / "stdout.txt";
    std::string cmd = bin + " " + args + " > " + out.string() + " 2> " + (dir / "stderr.txt").string();
    int rc = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    std::ifstream f(out);
    std::stringstream ss;
    ss << f.rdbuf();
    r.stdout_text = ss.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: cli_tests <tauquant-binary>\n";
        return 1;
    }
    std::string bin = argv[1];
    fs::path dir = fs::temp_directory_path() / "tauquant_cli_tests";
    fs::create_directories(dir);

    // quantize the constant 1: the written matrix is the identity
    {
        fs::path out = dir / "A.csv";
        auto r = run(bin, "quantize --symbol \"1\" --tau weyl --grid 1,64,pi --out " + out.string(),
                     dir);
        check(r.exit_code == 0, "quantize exit code");
        auto A = tauq::read_matrix_csv(out.string());
        check(A.mat.rows() == 64, "quantize matrix size");
        double err =
            (A.mat - Eigen::MatrixXcd::Identity(64, 64)).cwiseAbs().maxCoeff();
        check(err <= 1e-12, "quantize identity normalization");
    }

    // heisenberg midpoint of x and x^{-1}
    {
        auto r = run(bin,
                     "heisenberg midpoint --group standard --point 1,2,5 --point2 -1,-2,-5", dir);
        check(r.exit_code == 0, "heisenberg exit code");
        check(r.stdout_text == "0, 0, -4/3\n", "heisenberg midpoint output");
    }

    // convert x*g(k) from kn to akn: small defect in the report
    {
        fs::path rep = dir / "r.json";
        auto r = run(bin,
                     "convert --symbol \"x*exp(-((k/4)^2))\" --from kn --to akn --order 2 "
                     "--grid 1,64,pi --report " +
                         rep.string(),
                     dir);
        check(r.exit_code == 0, "convert exit code");
        std::string text = slurp(rep);
        auto pos = text.find("\"defect\":");
        check(pos != std::string::npos, "convert report has defect field");
        double defect = std::strtod(text.c_str() + pos + 9, nullptr);
        check(defect <= 1e-8, "convert defect within tolerance");
    }

    // validation failures exit with 2 and a machine-parsable stderr line
    {
        auto r = run(bin, "quantize --symbol \"x +\" --tau weyl --grid 1,64,pi --out " +
                              (dir / "bad.csv").string(),
                     dir);
        check(r.exit_code == 2, "syntax error exit code");
        std::string err = slurp(dir / "stderr.txt");
        check(err.rfind("E_VALIDATION:", 0) == 0, "stderr error prefix");
        check(!fs::exists(dir / "bad.csv"), "no partial outputs on validation failure");
    }
    {
        auto r = run(bin, "quantize --symbol \"1\" --tau nosuch --grid 1,64,pi --out " +
                              (dir / "bad2.csv").string(),
                     dir);
        check(r.exit_code == 2, "bad tau exit code");
    }

    // determinism: identical invocations give byte-identical outputs
    {
        fs::path o1 = dir / "d1.csv", o2 = dir / "d2.csv";
        std::string args =
            "quantize --symbol \"sin(x)*exp(-((k/4)^2))\" --symbol-im \"cos(x)/(1+k^2)\" "
            "--tau \"w/2+0.1*sin(w)\" --grid 1,32,pi --out ";
        run(bin, args + o1.string() + " --threads 1", dir);
        run(bin, args + o2.string() + " --threads 4", dir);
        check(slurp(o1) == slurp(o2), "byte-identical output across thread counts");
    }

    // config file with flag override
    {
        fs::path cfg = dir / "job.json";
        std::ofstream(cfg) << "{\"command\": \"check-tau\", \"tau\": \"weyl\", \"dim\": 1, "
                              "\"box\": 5.0, \"samples\": 500}\n";
        auto r = run(bin, "--config " + cfg.string(), dir);
        check(r.exit_code == 0, "config-driven run");
        check(r.stdout_text.find("mu_hat = 0") != std::string::npos, "config-driven output");
        auto r2 = run(bin, "check-tau --config " + cfg.string() + " --tau akn", dir);
        check(r2.exit_code == 0, "flag overrides config");
    }

    // apply + fast-kn path
    {
        tauq::Grid g(1, 32, M_PI);
        tauq::GridFunction u(g);
        for (int j = 0; j < g.size(); ++j) u.values[j] = std::polar(1.0, g.node(j));
        fs::path upath = dir / "u.csv", vpath = dir / "v.csv";
        tauq::write_grid_function_csv(upath.string(), u);
        auto r = run(bin, "apply --symbol \"k\" --tau kn --fast-kn --in " + upath.string() +
                              " --out " + vpath.string(),
                     dir);
        check(r.exit_code == 0, "apply exit code");
        auto v = tauq::read_grid_function_csv(vpath.string());
        double err = 0.0;
        for (int j = 0; j < g.size(); ++j) err = std::max(err, std::abs(v.values[j] - u.values[j]));
        check(err <= 1e-10, "fast-kn eigenfunction");
    }

    std::cout << (failures == 0 ? "CLI TESTS PASSED\n" : "CLI TESTS FAILED\n");
    return failures == 0 ? 0 : 1;
}
