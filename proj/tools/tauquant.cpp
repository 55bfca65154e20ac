// tauquant: batch front-end for the tau-quantization library.
//
// Exit codes: 0 success, 2 validation error, 3 numerical failure. Errors
// print one machine-parsable line on stderr: E_VALIDATION: ... / E_NUMERICAL: ...

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "tauquant/calculus.hpp"
#include "tauquant/heisenberg.hpp"

using json = nlohmann::ordered_json;
using namespace tauq;

namespace {

struct GridSpec {
    int dim = 1;
    int points = 64;
    double half_length = M_PI;
};

// "n,N,L" with L accepting expressions such as pi or pi/2
GridSpec parse_grid_spec(const std::string& text) {
    GridSpec s;
    auto first = text.find(',');
    auto second = text.find(',', first + 1);
    if (first == std::string::npos || second == std::string::npos)
        throw ValidationError("grid spec must be n,N,L");
    try {
        s.dim = std::stoi(text.substr(0, first));
        s.points = std::stoi(text.substr(first + 1, second - first - 1));
    } catch (const std::exception&) {
        throw ValidationError("bad grid spec: " + text);
    }
    s.half_length = parse_expression(text.substr(second + 1)).eval({});
    return s;
}

Grid make_grid(const GridSpec& s) { return Grid(s.dim, s.points, s.half_length); }

ComplexSymbol parse_symbol(const std::string& re, const std::string& im) {
    return ComplexSymbol::parse(re, im);
}

void write_json(const std::string& path, const json& j) {
    std::ofstream f(path);
    if (!f) throw ValidationError("cannot open for writing: " + path);
    f << j.dump(2) << "\n";
    if (!f) throw ValidationError("write failed: " + path);
}

json tau_json(const QuantizingFunction& tau) {
    return json{{"name", tau.name},
                {"dim", tau.dim},
                {"components", tau.components_text()},
                {"polynomial", tau.is_polynomial}};
}

json complex_symbol_json(const ComplexSymbol& s) {
    return json{{"re", s.re.to_string()}, {"im", s.im.to_string()}};
}

json expansion_json(const ExpansionResult& res) {
    json terms = json::array();
    for (const auto& t : res.terms) {
        json jt{{"alpha", t.alpha.e},
                {"beta", t.beta.e},
                {"amplitude_re", t.amplitude.re.to_string()},
                {"amplitude_im", t.amplitude.im.to_string()}};
        if (t.closed) {
            json closed = json::array();
            auto wn = w_names(res.target_tau.dim);
            std::vector<std::string> names(wn.begin(), wn.end());
            for (const auto& c : *t.closed)
                closed.push_back(json{{"delta", c.delta.e},
                                      {"i_power", c.delta.order() % 4},
                                      {"coefficient", c.coefficient.to_string(names)}});
            jt["closed_form"] = closed;
        }
        terms.push_back(std::move(jt));
    }
    return json{{"target_tau", res.target_tau.name},
                {"M", res.order_M},
                {"N", res.taylor_N},
                {"terms", terms},
                {"remainder", {{"order", res.remainder.order}, {"growth", res.remainder.growth}}}};
}

// operator-norm defect between a reference operator and an assembled expansion
json defect_json(const Eigen::MatrixXcd& reference, const Eigen::MatrixXcd& assembled) {
    double defect = operator_norm(Eigen::MatrixXcd(reference - assembled)).norm;
    double scale = operator_norm(reference).norm;
    return json{{"defect", defect},
                {"defect_rel", scale > 0 ? defect / scale : defect},
                {"reference_norm", scale}};
}

struct CommonArgs {
    std::string symbol_re, symbol_im;
    std::string grid = "1,64,pi";
    std::string tau = "kn";
    int threads = 0;
};

int run_app(std::vector<std::string> args);

// --config support: JSON keys mirror long flag names; command-line flags
// override config values (config-derived arguments are injected first).
std::vector<std::string> merge_config(std::vector<std::string> args) {
    std::string config_path;
    for (std::size_t i = 0; i + 1 < args.size(); ++i) {
        if (args[i] == "--config") {
            config_path = args[i + 1];
            args.erase(args.begin() + i, args.begin() + i + 2);
            break;
        }
    }
    if (config_path.empty()) return args;
    std::ifstream f(config_path);
    if (!f) throw ValidationError("cannot open config: " + config_path);
    json cfg = json::parse(f, nullptr, true, true);
    if (!cfg.is_object()) throw ValidationError("config must be a JSON object");

    std::vector<std::string> merged;
    std::string command;
    if (cfg.contains("command")) command = cfg["command"].get<std::string>();
    // an explicit subcommand on the command line wins
    if (!args.empty() && !args.front().empty() && args.front()[0] != '-') command = args.front();
    if (command.empty()) throw ValidationError("no command given (config key \"command\")");
    merged.push_back(command);
    if (!args.empty() && !args.front().empty() && args.front()[0] != '-')
        args.erase(args.begin());
    for (const auto& [key, value] : cfg.items()) {
        if (key == "command") continue;
        std::string text = value.is_string() ? value.get<std::string>() : value.dump();
        merged.push_back("--" + key);
        merged.push_back(text);
    }
    merged.insert(merged.end(), args.begin(), args.end());
    return merged;
}

int run_app(std::vector<std::string> args) {
    CLI::App app{"tau-quantized pseudo-differential operators on periodic grids"};
    app.option_defaults()->take_last();
    app.require_subcommand(1);
    std::uint64_t seed = 0;
    app.add_option("--seed", seed, "seed for randomized suites");

    // ---- quantize ----
    auto* quantize = app.add_subcommand("quantize", "assemble a tau-quantized symbol");
    CommonArgs qa;
    std::string q_out;
    bool q_oracle = false;
    quantize->add_option("--symbol", qa.symbol_re, "real part of the symbol")->required();
    quantize->add_option("--symbol-im", qa.symbol_im, "imaginary part of the symbol");
    quantize->add_option("--tau", qa.tau, "kn|akn|weyl|linear:<s>|components");
    quantize->add_option("--grid", qa.grid, "n,N,L");
    quantize->add_option("--out", q_out, "matrix CSV path")->required();
    quantize->add_option("--threads", qa.threads, "assembly threads (0 = auto)");
    quantize->add_flag("--oracle", q_oracle, "use the brute-force oracle assembler");

    // ---- amplitude ----
    auto* amplitude = app.add_subcommand("amplitude", "assemble an amplitude operator");
    CommonArgs aa;
    std::string a_out;
    bool a_wrapped = false;
    amplitude->add_option("--amplitude", aa.symbol_re, "real part of a(x,y,k)")->required();
    amplitude->add_option("--amplitude-im", aa.symbol_im, "imaginary part");
    amplitude->add_option("--grid", aa.grid, "n,N,L");
    amplitude->add_option("--out", a_out, "matrix CSV path")->required();
    amplitude->add_option("--threads", aa.threads, "assembly threads");
    amplitude->add_flag("--wrapped", a_wrapped, "evaluate y as x + wrap(y-x)");

    // ---- apply ----
    auto* apply_cmd = app.add_subcommand("apply", "apply an operator to a grid function");
    CommonArgs pa;
    std::string p_matrix, p_in, p_out;
    bool p_fast = false;
    apply_cmd->add_option("--matrix", p_matrix, "operator CSV (alternative to --symbol)");
    apply_cmd->add_option("--symbol", pa.symbol_re, "real part of the symbol");
    apply_cmd->add_option("--symbol-im", pa.symbol_im, "imaginary part");
    apply_cmd->add_option("--tau", pa.tau, "quantizing function");
    apply_cmd->add_option("--grid", pa.grid, "n,N,L");
    apply_cmd->add_option("--in", p_in, "input grid function CSV")->required();
    apply_cmd->add_option("--out", p_out, "output grid function CSV")->required();
    apply_cmd->add_flag("--fast-kn", p_fast, "Kohn-Nirenberg fast path (tau = kn)");

    // ---- adjoint / transpose ----
    CommonArgs adj_args, tr_args;
    std::string adj_report, tr_report;
    bool adj_check = false, tr_check = false;
    auto add_dual = [&](const char* name, const char* help, CommonArgs& store,
                        std::string& report, bool& check) {
        auto* cmd = app.add_subcommand(name, help);
        cmd->add_option("--symbol", store.symbol_re, "real part")->required();
        cmd->add_option("--symbol-im", store.symbol_im, "imaginary part");
        cmd->add_option("--tau", store.tau, "quantizing function");
        cmd->add_option("--grid", store.grid, "n,N,L");
        cmd->add_option("--report", report, "JSON report path");
        cmd->add_flag("--check", check, "verify the matrix-level contract on the grid");
        return cmd;
    };
    auto* adjoint_cmd = add_dual("adjoint", "adjoint symbol/tau pair", adj_args, adj_report,
                                 adj_check);
    auto* transpose_cmd = add_dual("transpose", "transpose symbol/tau pair", tr_args, tr_report,
                                   tr_check);

    // ---- convert ----
    auto* convert = app.add_subcommand("convert", "change quantization");
    CommonArgs ca;
    std::string c_from = "kn", c_to = "weyl", c_report, c_terms, c_form = "pre-ibp";
    int c_order = 2, c_taylor = 1;
    convert->add_option("--symbol", ca.symbol_re, "real part")->required();
    convert->add_option("--symbol-im", ca.symbol_im, "imaginary part");
    convert->add_option("--from", c_from, "source quantizing function");
    convert->add_option("--to", c_to, "target quantizing function");
    convert->add_option("--order", c_order, "expansion order M");
    convert->add_option("--taylor", c_taylor, "taylor depth N");
    convert->add_option("--grid", ca.grid, "n,N,L");
    convert->add_option("--report", c_report, "JSON report path");
    convert->add_option("--terms", c_terms, "expansion terms JSON path");
    convert->add_option("--form", c_form, "pre-ibp|closed assembly for the defect");
    convert->add_option("--threads", ca.threads, "assembly threads");

    // ---- compose ----
    auto* compose = app.add_subcommand("compose", "compose two quantized operators");
    std::string k_s1, k_s1im, k_s2, k_s2im, k_t1 = "kn", k_t2 = "kn", k_t3 = "kn";
    std::string k_grid = "1,64,pi", k_report, k_terms, k_form = "pre-ibp";
    int k_order = 2, k_taylor = 1, k_threads = 0;
    compose->add_option("--symbol1", k_s1, "first symbol, real part")->required();
    compose->add_option("--symbol1-im", k_s1im, "first symbol, imaginary part");
    compose->add_option("--tau1", k_t1, "first quantizing function");
    compose->add_option("--symbol2", k_s2, "second symbol, real part")->required();
    compose->add_option("--symbol2-im", k_s2im, "second symbol, imaginary part");
    compose->add_option("--tau2", k_t2, "second quantizing function");
    compose->add_option("--to", k_t3, "target quantizing function");
    compose->add_option("--order", k_order, "expansion order M");
    compose->add_option("--taylor", k_taylor, "taylor depth N");
    compose->add_option("--grid", k_grid, "n,N,L");
    compose->add_option("--report", k_report, "JSON report path");
    compose->add_option("--terms", k_terms, "expansion terms JSON path");
    compose->add_option("--form", k_form, "pre-ibp|closed assembly for the defect");
    compose->add_option("--threads", k_threads, "assembly threads");

    // ---- parametrix ----
    auto* par = app.add_subcommand("parametrix", "elliptic parametrix");
    CommonArgs xa;
    std::string x_report, x_out_symbol;
    double x_m = 2.0, x_r0 = 2.0;
    int x_order = 2;
    par->add_option("--symbol", xa.symbol_re, "real part")->required();
    par->add_option("--symbol-im", xa.symbol_im, "imaginary part");
    par->add_option("--tau", xa.tau, "quantizing function");
    par->add_option("--m", x_m, "symbol order");
    par->add_option("--order", x_order, "parametrix order M");
    par->add_option("--r0", x_r0, "ellipticity radius R0");
    par->add_option("--grid", xa.grid, "n,N,L (for the residual check)");
    par->add_option("--report", x_report, "JSON report path");
    par->add_option("--out-symbol", x_out_symbol, "JSON path for the parametrix symbol");

    // ---- norm ----
    auto* norm = app.add_subcommand("norm", "operator norm of a stored matrix");
    std::string n_matrix, n_method = "power-iteration", n_report;
    norm->add_option("--matrix", n_matrix, "operator CSV")->required();
    norm->add_option("--method", n_method, "power-iteration|full-decomposition");
    norm->add_option("--report", n_report, "JSON report path");

    // ---- cv-bound ----
    auto* cv = app.add_subcommand("cv-bound", "Calderon-Vaillancourt derivative sups");
    std::string v_amp, v_amp_im, v_sym, v_sym_im, v_tau, v_report;
    int v_dim = 1, v_samples = 4096;
    double v_bx = M_PI, v_by = M_PI, v_bxi = 16.0;
    cv->add_option("--amplitude", v_amp, "amplitude, real part");
    cv->add_option("--amplitude-im", v_amp_im, "amplitude, imaginary part");
    cv->add_option("--symbol", v_sym, "symbol, real part (with --tau)");
    cv->add_option("--symbol-im", v_sym_im, "symbol, imaginary part");
    cv->add_option("--tau", v_tau, "quantizing function for the symbol form");
    cv->add_option("--dim", v_dim, "dimension");
    cv->add_option("--box-x", v_bx, "x box halfwidth");
    cv->add_option("--box-y", v_by, "y box halfwidth");
    cv->add_option("--box-xi", v_bxi, "xi box halfwidth");
    cv->add_option("--samples", v_samples, "sample count");
    cv->add_option("--report", v_report, "JSON report path");

    // ---- garding ----
    auto* gard = app.add_subcommand("garding", "Garding inequality fit");
    CommonArgs ga;
    std::string g_report;
    double g_m = 1.0, g_s = 0.0;
    gard->add_option("--symbol", ga.symbol_re, "real part")->required();
    gard->add_option("--symbol-im", ga.symbol_im, "imaginary part");
    gard->add_option("--tau", ga.tau, "quantizing function");
    gard->add_option("--m", g_m, "upper Sobolev order");
    gard->add_option("--s", g_s, "lower Sobolev order");
    gard->add_option("--grid", ga.grid, "n,N,L");
    gard->add_option("--report", g_report, "JSON report path");

    // ---- check-tau ----
    auto* chk = app.add_subcommand("check-tau", "admissibility probe");
    std::string t_tau = "weyl", t_report;
    int t_dim = 1, t_samples = 2000;
    double t_box = 5.0;
    chk->add_option("--tau", t_tau, "quantizing function")->required();
    chk->add_option("--dim", t_dim, "dimension");
    chk->add_option("--box", t_box, "probe box halfwidth");
    chk->add_option("--samples", t_samples, "sample count");
    chk->add_option("--report", t_report, "JSON report path");

    // ---- reduce-amplitude ----
    auto* red = app.add_subcommand("reduce-amplitude", "apply the (1-Lap)/(1+|x-y|^2) reduction");
    std::string r_amp, r_amp_im, r_report, r_grid;
    int r_dim = 1, r_nred = 1, r_threads = 0;
    red->add_option("--amplitude", r_amp, "real part")->required();
    red->add_option("--amplitude-im", r_amp_im, "imaginary part");
    red->add_option("--dim", r_dim, "dimension");
    red->add_option("--nred", r_nred, "reduction order");
    red->add_option("--grid", r_grid, "n,N,L (verify operator equality)");
    red->add_option("--report", r_report, "JSON report path");
    red->add_option("--threads", r_threads, "assembly threads");

    // ---- changevar ----
    auto* cvar = app.add_subcommand("changevar", "leading-order change of variables");
    CommonArgs wa;
    std::string w_report;
    cvar->add_option("--symbol", wa.symbol_re, "real part")->required();
    cvar->add_option("--symbol-im", wa.symbol_im, "imaginary part");
    cvar->add_option("--tau", wa.tau, "quantizing function (bounded derivatives)");
    cvar->add_option("--grid", wa.grid, "n,N,L");
    cvar->add_option("--report", w_report, "JSON report path");

    // ---- heisenberg ----
    auto* heis = app.add_subcommand("heisenberg", "exact Heisenberg-group computations");
    heis->require_subcommand(1);
    std::string h_group = "standard", h_point, h_point2, h_method = "closed", h_report;
    for (const char* sub : {"tau", "midpoint", "symcheck"}) {
        auto* s = heis->add_subcommand(sub);
        s->add_option("--group", h_group, "polarised|standard");
        s->add_option("--point", h_point, "a,b,c with rational entries")->required();
        if (std::string(sub) == "midpoint")
            s->add_option("--point2", h_point2, "second point")->required();
        if (std::string(sub) == "tau")
            s->add_option("--method", h_method, "integral|closed");
        s->add_option("--report", h_report, "JSON report path");
    }

    try {
        std::vector<const char*> argv;
        argv.push_back("tauquant");
        for (const auto& a : args) argv.push_back(a.c_str());
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "E_VALIDATION: " << e.what() << "\n";
        return 2;
    }

    // ------------- handlers -------------

    if (*quantize) {
        Grid g = make_grid(parse_grid_spec(qa.grid));
        ComplexSymbol sigma = parse_symbol(qa.symbol_re, qa.symbol_im);
        QuantizingFunction tau = parse_tau_spec(qa.tau, g.dim());
        OperatorMatrix A = q_oracle ? op_oracle(sigma, tau, g)
                                    : op_symbol(sigma, tau, g, qa.threads);
        write_matrix_csv(q_out, A);
        std::cout << "quantize: wrote " << A.mat.rows() << "x" << A.mat.cols() << " operator to "
                  << q_out << "\n";
        return 0;
    }

    if (*amplitude) {
        Grid g = make_grid(parse_grid_spec(aa.grid));
        ComplexSymbol amp = parse_symbol(aa.symbol_re, aa.symbol_im);
        OperatorMatrix A = op_amplitude(
            amp, g, a_wrapped ? DiffConvention::Wrapped : DiffConvention::Raw, aa.threads);
        write_matrix_csv(a_out, A);
        std::cout << "amplitude: wrote " << A.mat.rows() << "x" << A.mat.cols()
                  << " operator to " << a_out << "\n";
        return 0;
    }

    if (*apply_cmd) {
        GridFunction u = read_grid_function_csv(p_in);
        GridFunction v(u.grid);
        if (p_fast) {
            if (pa.symbol_re.empty())
                throw ValidationError("--fast-kn needs --symbol");
            QuantizingFunction tau = parse_tau_spec(pa.tau, u.grid.dim());
            bool tau_zero = true;
            for (const auto& c : tau.components) tau_zero = tau_zero && c.is_constant(0.0);
            if (!tau_zero) throw ValidationError("--fast-kn requires tau = kn");
            v = kn_fast_apply(parse_symbol(pa.symbol_re, pa.symbol_im), u.grid, u);
        } else if (!p_matrix.empty()) {
            OperatorMatrix A = read_matrix_csv(p_matrix);
            v = apply(A, u);
        } else if (!pa.symbol_re.empty()) {
            Grid g = u.grid;
            QuantizingFunction tau = parse_tau_spec(pa.tau, g.dim());
            v = apply(op_symbol(parse_symbol(pa.symbol_re, pa.symbol_im), tau, g, pa.threads), u);
        } else {
            throw ValidationError("apply needs --matrix or --symbol");
        }
        write_grid_function_csv(p_out, v);
        std::cout << "apply: wrote " << p_out << "\n";
        return 0;
    }

    auto run_dual = [&](const CommonArgs& a, const std::string& report_path, bool check,
                        DualKind kind, const char* name) {
        GridSpec gs = parse_grid_spec(a.grid);
        ComplexSymbol sigma = parse_symbol(a.symbol_re, a.symbol_im);
        QuantizingFunction tau = parse_tau_spec(a.tau, gs.dim);
        auto [dual_sym, dual_tau] = dual_quantization(sigma, tau, kind);
        json rep{{"kind", name},
                 {"symbol", complex_symbol_json(dual_sym)},
                 {"tau", tau_json(dual_tau)}};
        if (check) {
            Grid g = make_grid(gs);
            auto A = op_symbol(sigma, tau, g);
            auto D = op_symbol(dual_sym, dual_tau, g);
            Eigen::MatrixXcd target = kind == DualKind::Adjoint
                                          ? Eigen::MatrixXcd(A.mat.adjoint())
                                          : Eigen::MatrixXcd(A.mat.transpose());
            rep["check"] = defect_json(target, D.mat);
        }
        std::cout << name << ": tau* = " << dual_tau.components_text()
                  << ", symbol re = " << dual_sym.re.to_string() << "\n";
        if (!report_path.empty()) {
            write_json(report_path, rep);
            std::cout << name << ": report " << report_path << "\n";
        }
        return 0;
    };
    if (*adjoint_cmd) return run_dual(adj_args, adj_report, adj_check, DualKind::Adjoint, "adjoint");
    if (*transpose_cmd)
        return run_dual(tr_args, tr_report, tr_check, DualKind::Transpose, "transpose");

    if (*convert) {
        Grid g = make_grid(parse_grid_spec(ca.grid));
        ComplexSymbol sigma = parse_symbol(ca.symbol_re, ca.symbol_im);
        QuantizingFunction from = parse_tau_spec(c_from, g.dim());
        QuantizingFunction to = parse_tau_spec(c_to, g.dim());
        auto res = convert_quantization(sigma, from, to, c_order, c_taylor);
        auto A = op_symbol(sigma, from, g, ca.threads);
        ExpansionForm form = c_form == "closed" ? ExpansionForm::Closed : ExpansionForm::PreIbp;
        auto B = assemble_expansion(res, g, form, ca.threads);
        json rep = defect_json(A.mat, B.mat);
        rep["form"] = c_form;
        rep["M"] = c_order;
        rep["N"] = c_taylor;
        rep["from"] = from.name;
        rep["to"] = to.name;
        std::cout << "convert: defect " << rep["defect"].get<double>() << " (" << from.name
                  << " -> " << to.name << ", M = " << c_order << ")\n";
        if (!c_report.empty()) write_json(c_report, rep);
        if (!c_terms.empty()) write_json(c_terms, expansion_json(res));
        return 0;
    }

    if (*compose) {
        Grid g = make_grid(parse_grid_spec(k_grid));
        ComplexSymbol s1 = parse_symbol(k_s1, k_s1im);
        ComplexSymbol s2 = parse_symbol(k_s2, k_s2im);
        QuantizingFunction t1 = parse_tau_spec(k_t1, g.dim());
        QuantizingFunction t2 = parse_tau_spec(k_t2, g.dim());
        QuantizingFunction t3 = parse_tau_spec(k_t3, g.dim());
        auto res = compose_expansion(s1, t1, s2, t2, t3, k_order, k_taylor);
        auto A = op_symbol(s1, t1, g, k_threads);
        auto B = op_symbol(s2, t2, g, k_threads);
        ExpansionForm form = k_form == "closed" ? ExpansionForm::Closed : ExpansionForm::PreIbp;
        auto C = assemble_expansion(res, g, form, k_threads);
        json rep = defect_json(A.mat * B.mat, C.mat);
        rep["form"] = k_form;
        rep["M"] = k_order;
        rep["to"] = t3.name;
        std::cout << "compose: defect " << rep["defect"].get<double>() << " (target " << t3.name
                  << ", M = " << k_order << ")\n";
        if (!k_report.empty()) write_json(k_report, rep);
        if (!k_terms.empty()) write_json(k_terms, expansion_json(res));
        return 0;
    }

    if (*par) {
        Grid g = make_grid(parse_grid_spec(xa.grid));
        ComplexSymbol sigma = parse_symbol(xa.symbol_re, xa.symbol_im);
        QuantizingFunction tau = parse_tau_spec(xa.tau, g.dim());
        ParametrixOptions opts;
        opts.x_halfwidth = g.half_length();
        opts.xi_halfwidth = g.max_frequency();
        ComplexSymbol kappa = parametrix(sigma, tau, x_m, x_order, x_r0, opts);
        auto Ak = op_symbol(kappa, tau, g);
        auto As = op_symbol(sigma, tau, g);
        Eigen::MatrixXcd R = Ak.mat * As.mat - Eigen::MatrixXcd::Identity(g.size(), g.size());
        // residual over the fourier modes with 2 R0 <= |xi| <= Xi/2
        std::vector<int> band;
        for (int q = 0; q < g.size(); ++q) {
            double fq[2], xi2 = 0.0;
            g.frequency_point(q, fq);
            for (int d = 0; d < g.dim(); ++d) xi2 += fq[d] * fq[d];
            double axi = std::sqrt(xi2);
            if (axi >= 2 * x_r0 && axi <= g.max_frequency() / 2) band.push_back(q);
        }
        double residual = 0.0;
        if (!band.empty()) {
            Eigen::MatrixXcd B(g.size(), band.size());
            double xpt[2];
            for (std::size_t c = 0; c < band.size(); ++c) {
                int qidx[2];
                g.decode(band[c], qidx);
                for (int j = 0; j < g.size(); ++j) {
                    g.node_point(j, xpt);
                    double angle = 0.0;
                    for (int d = 0; d < g.dim(); ++d) angle += xpt[d] * g.frequency(qidx[d]);
                    B(j, static_cast<Eigen::Index>(c)) =
                        std::polar(1.0 / std::sqrt(static_cast<double>(g.size())), angle);
                }
            }
            residual = operator_norm(Eigen::MatrixXcd(R * B)).norm;
        }
        json rep{{"residual_band", residual},
                 {"band_modes", band.size()},
                 {"M", x_order},
                 {"R0", x_r0},
                 {"kappa", complex_symbol_json(kappa)}};
        std::cout << "parametrix: band residual " << residual << " with M = " << x_order << "\n";
        if (!x_report.empty()) write_json(x_report, rep);
        if (!x_out_symbol.empty()) write_json(x_out_symbol, complex_symbol_json(kappa));
        return 0;
    }

    if (*norm) {
        OperatorMatrix A = read_matrix_csv(n_matrix);
        NormReport r = operator_norm(A, n_method);
        json rep{{"norm", r.norm},
                 {"method", r.method},
                 {"iterations", r.iterations},
                 {"residual", r.residual}};
        std::cout << "norm: " << r.norm << " (" << r.method << ")\n";
        if (!n_report.empty()) write_json(n_report, rep);
        return 0;
    }

    if (*cv) {
        CVReport r;
        if (!v_sym.empty()) {
            if (v_tau.empty()) throw ValidationError("cv-bound symbol form needs --tau");
            r = cv_bound_symbol(parse_symbol(v_sym, v_sym_im), parse_tau_spec(v_tau, v_dim), v_bx,
                                v_by, v_bxi, v_samples);
        } else if (!v_amp.empty()) {
            r = cv_bound(parse_symbol(v_amp, v_amp_im), v_dim, v_bx, v_by, v_bxi, v_samples);
        } else {
            throw ValidationError("cv-bound needs --amplitude or --symbol");
        }
        json table = json::array();
        for (const auto& e : r.table)
            table.push_back(json{{"alpha", e.alpha.e},
                                 {"beta", e.beta.e},
                                 {"gamma", e.gamma.e},
                                 {"sup", e.sup}});
        json rep{{"m_val", r.m_val},
                 {"samples", r.samples},
                 {"box", {r.box_x, r.box_y, r.box_xi}},
                 {"table", table}};
        if (r.tau_derivative_sups) {
            json sups = json::array();
            for (const auto& [idx, sup] : *r.tau_derivative_sups)
                sups.push_back(json{{"alpha", idx.e}, {"sup", sup}});
            rep["tau_derivative_sups"] = sups;
        }
        std::cout << "cv-bound: M = " << r.m_val << " over " << r.table.size()
                  << " derivative indices\n";
        if (!v_report.empty()) write_json(v_report, rep);
        return 0;
    }

    if (*gard) {
        Grid g = make_grid(parse_grid_spec(ga.grid));
        GardingReport r = garding_check(parse_symbol(ga.symbol_re, ga.symbol_im),
                                        parse_tau_spec(ga.tau, g.dim()), g_m, g_s, g);
        json rep{{"C1", r.C1},
                 {"C2", r.C2},
                 {"fit_ok", r.fit_ok},
                 {"hypothesis_C", r.hypothesis_C},
                 {"R", r.R},
                 {"min_eig_verification", r.min_eig_verification},
                 {"verification_scale", r.verification_scale}};
        std::cout << "garding: C1 = " << r.C1 << ", C2 = " << r.C2
                  << (r.fit_ok ? "" : " (fit failed)") << "\n";
        if (!g_report.empty()) write_json(g_report, rep);
        return 0;
    }

    if (*chk) {
        QuantizingFunction tau = parse_tau_spec(t_tau, t_dim);
        AdmissibilityReport r = check_admissible(tau, t_box, t_samples);
        json rep{{"tau", tau_json(tau)},
                 {"tau0_residual", r.tau0_residual},
                 {"mu_hat", r.mu_hat},
                 {"mu_fit_ok", r.mu_fit_ok},
                 {"bounded_derivatives", r.bounded_derivatives},
                 {"hadamard_ok", r.hadamard_ok},
                 {"min_jacobian", r.min_jacobian},
                 {"box", r.box_halfwidth},
                 {"samples", r.samples}};
        std::cout << "check-tau: mu_hat = " << r.mu_hat
                  << ", bounded = " << (r.bounded_derivatives ? "yes" : "no")
                  << ", hadamard = " << (r.hadamard_ok ? "yes" : "no") << "\n";
        if (!t_report.empty()) write_json(t_report, rep);
        return 0;
    }

    if (*red) {
        ComplexSymbol a = parse_symbol(r_amp, r_amp_im);
        ComplexSymbol ak = reduce_amplitude(a, r_dim, r_nred);
        json rep{{"reduced", complex_symbol_json(ak)}, {"nred", r_nred}};
        if (!r_grid.empty()) {
            Grid g = make_grid(parse_grid_spec(r_grid));
            auto A = op_amplitude(a, g, DiffConvention::Raw, r_threads);
            auto Ak = op_amplitude(ak, g, DiffConvention::Raw, r_threads);
            rep["check"] = defect_json(A.mat, Ak.mat);
        }
        std::cout << "reduce-amplitude: re = " << ak.re.to_string() << "\n";
        if (!r_report.empty()) write_json(r_report, rep);
        return 0;
    }

    if (*cvar) {
        Grid g = make_grid(parse_grid_spec(wa.grid));
        auto [b0, r] = changevar_leading(parse_symbol(wa.symbol_re, wa.symbol_im),
                                         parse_tau_spec(wa.tau, g.dim()), g);
        json rep{{"b0", complex_symbol_json(b0)},
                 {"det_inv_map", r.det_inv_map},
                 {"det_L_inverse", r.det_L_inverse},
                 {"rel_mismatch", r.rel_mismatch},
                 {"mu_hat", r.admissibility.mu_hat},
                 {"bounded_derivatives", r.admissibility.bounded_derivatives},
                 {"hadamard_ok", r.admissibility.hadamard_ok}};
        std::cout << "changevar: rel mismatch " << r.rel_mismatch << "\n";
        if (!w_report.empty()) write_json(w_report, rep);
        return 0;
    }

    if (*heis) {
        HeisVariant variant;
        if (h_group == "polarised")
            variant = HeisVariant::Polarised;
        else if (h_group == "standard")
            variant = HeisVariant::Standard;
        else
            throw ValidationError("group must be polarised or standard");
        HeisPoint p = parse_heis_point(variant, h_point);
        json rep{{"group", h_group}, {"point", p.to_string()}};
        if (heis->got_subcommand("tau")) {
            SymmetryMethod method;
            if (h_method == "integral")
                method = SymmetryMethod::Integral;
            else if (h_method == "closed")
                method = SymmetryMethod::Closed;
            else
                throw ValidationError("method must be integral or closed");
            HeisPoint t = symmetry_tau(p, method);
            std::cout << t.to_string() << "\n";
            rep["tau"] = t.to_string();
            rep["method"] = h_method;
        } else if (heis->got_subcommand("midpoint")) {
            HeisPoint q = parse_heis_point(variant, h_point2);
            rep["point2"] = q.to_string();
            if (variant == HeisVariant::Standard) {
                HeisPoint m = midpoint(p, q);
                std::cout << m.to_string() << "\n";
                rep["midpoint"] = m.to_string();
                rep["paths_agree"] = true;
            } else {
                // only the group-operation path is printed for the polarised
                // variant; the closed form is stated for the standard one
                HeisPoint m = midpoint_group_path(p, q);
                std::cout << m.to_string() << "\n";
                rep["midpoint"] = m.to_string();
                rep["extrapolation"] = true;
            }
        } else {
            bool ok = check_symmetry(p);
            std::cout << (ok ? "symmetry holds" : "symmetry FAILS") << "\n";
            rep["symmetry"] = ok;
        }
        if (!h_report.empty()) write_json(h_report, rep);
        return 0;
    }

    throw ValidationError("no command given");
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        return run_app(merge_config(std::move(args)));
    } catch (const NumericalError& e) {
        std::cerr << "E_NUMERICAL: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "E_VALIDATION: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "E_VALIDATION: " << e.what() << "\n";
        return 2;
    }
}
