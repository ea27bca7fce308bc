#include "svlab/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include "svlab/analysis.hpp"
#include "svlab/measures.hpp"
#include "svlab/resolvent.hpp"

namespace svlab {

namespace {

namespace fs = std::filesystem;

class Output {
public:
    Output(const ExperimentConfig& cfg, const RunOptions& opts) {
        dir_ = opts.out_dir.empty() ? cfg.output.dir : opts.out_dir;
        meta_.config_hash = cfg.hash;
        meta_.seed = opts.seed ? *opts.seed : cfg.mc.seed;
        fs::create_directories(dir_);
    }

    const ReportMeta& meta() const { return meta_; }
    std::uint64_t seed() const { return meta_.seed; }

    // File with the metadata lines already written.
    std::ofstream open(const std::string& name, double w_p = 0.0) const {
        std::ofstream os(fs::path(dir_) / name);
        if (!os) throw Error("cannot write " + (fs::path(dir_) / name).string());
        ReportMeta m = meta_;
        m.w_p = w_p;
        write_meta(os, m);
        os << std::setprecision(17);
        return os;
    }

    // Report writers emit their own metadata.
    std::ofstream open_raw(const std::string& name) const {
        std::ofstream os(fs::path(dir_) / name);
        if (!os) throw Error("cannot write " + (fs::path(dir_) / name).string());
        return os;
    }

    ReportMeta meta_with(double w_p) const {
        ReportMeta m = meta_;
        m.w_p = w_p;
        return m;
    }

private:
    std::string dir_;
    ReportMeta meta_;
};

void require_kernel(const ExperimentConfig& cfg) {
    if (!cfg.kernel.present) throw ConfigError("missing [kernel] section");
}

void require_coefficients(const ExperimentConfig& cfg) {
    if (!cfg.coefficients.present) throw ConfigError("missing [coefficients] section");
}

void write_series(std::ofstream os, const TimeGrid& grid, const std::vector<double>& v) {
    os << "t,value\n";
    for (int i = 0; i <= grid.steps; ++i) os << grid.node(i) << ',' << v[i] << '\n';
}

double norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

KernelSpec convolution_or_zero(const ScalarFunction& f) {
    return f.is_zero() ? KernelSpec::constant(0.0) : KernelSpec::convolution(f);
}

// Bounds on |B| and |Sigma|: k1 + l1 |x| and k2 + l2 |x| (l's include the mean-field parts).
struct GrowthKernels {
    KernelSpec k1, k2, l1, l2;
};

GrowthKernels growth_kernels(const ExperimentConfig& cfg) {
    const auto& C = cfg.coefficients;
    GrowthKernels g;
    g.k1 = convolution_or_zero(C.f.make_abs(norm(C.kappa_vector())));
    g.k2 = convolution_or_zero(C.g.make_abs(norm(C.eta_matrix(cfg.mc.d))));
    g.l1 = convolution_or_zero(C.f.make_abs(std::abs(C.f1) + std::abs(C.f2)));
    g.l2 = convolution_or_zero(C.g.make_abs(std::abs(C.g1) + std::abs(C.g2)));
    return g;
}

SolverOptions solver_options(const ExperimentConfig& cfg, const RunOptions& opts) {
    SolverOptions so;
    so.threads = opts.threads;
    so.drift_rule = cfg.coefficients.drift_rule;
    so.diffusion_rule = cfg.coefficients.diffusion_rule;
    so.p = cfg.analysis.p;
    so.integrated_seminorm = cfg.analysis.integrated_seminorm;
    return so;
}

struct Problem {
    CoefficientSpec coef;
    XiFn xi;
    std::shared_ptr<const BrownianDriver> driver;
    SolverOptions opts;
};

Problem make_problem(const ExperimentConfig& cfg, const RunOptions& opts, std::uint64_t seed) {
    require_coefficients(cfg);
    Problem pr;
    pr.coef = cfg.coefficients.spec(cfg.mc.d);
    pr.xi = constant_xi(cfg.coefficients.xi_vector());
    pr.driver = std::make_shared<BrownianDriver>(seed, cfg.mc.N, cfg.time_grid(), cfg.mc.d);
    pr.opts = solver_options(cfg, opts);
    return pr;
}

// Moments of X^{(k)} - reference against picard_error_bound_1, k = 1..K.
std::vector<BoundReport> picard_error_reports(const ExperimentConfig& cfg, const std::vector<PathEnsemble>& iterates,
                                              const PathEnsemble& reference, int threads) {
    const auto& A = cfg.analysis;
    const TimeGrid grid = cfg.time_grid();
    auto gk = growth_kernels(cfg);
    auto lambda = transformed_kernel_l(gk.l1, gk.l2, A.wp(), grid);
    auto Delta = moment_function(iterates[1], A.p, threads, &iterates[0]).values;
    std::vector<BoundReport> out;
    for (std::size_t k = 1; k < iterates.size(); ++k) {
        auto bound = picard_error_bound_1(lambda, Delta, static_cast<int>(k), A.tol * 1e-2);
        auto err = moment_function(iterates[k], A.p, threads, &reference);
        BoundReport r;
        r.name = "picard_error_" + std::to_string(k);
        r.slack = A.slack;
        r.t = err.t;
        r.lhs = err.values;
        r.se = err.se;
        r.rhs = bound.values;
        for (std::size_t i = 0; i < r.t.size(); ++i)
            r.pass.push_back(r.lhs[i] <= r.rhs[i] * A.slack + 3.0 * r.se[i]);
        out.push_back(std::move(r));
    }
    return out;
}

void write_picard_reports(const Output& out, const std::vector<BoundReport>& reports, double w_p) {
    auto os = out.open("picard_error.csv", w_p);
    os << "iterate,t,lhs,se,rhs,pass\n";
    for (std::size_t k = 0; k < reports.size(); ++k) {
        const auto& r = reports[k];
        for (std::size_t i = 0; i < r.t.size(); ++i)
            os << k + 1 << ',' << r.t[i] << ',' << r.lhs[i] << ',' << r.se[i] << ',' << r.rhs[i] << ','
               << (r.pass[i] ? 1 : 0) << '\n';
    }
}

bool all_pass(const std::vector<BoundReport>& reports) {
    for (const auto& r : reports)
        if (!r.all_pass()) return false;
    return true;
}

void write_mean(const Output& out, const PathEnsemble& X) {
    const int N = X.particles(), m = X.dim();
    auto os = out.open("mean.csv");
    os << "t";
    for (int c = 0; c < m; ++c) os << ",mean_" << c + 1 << ",se_" << c + 1;
    os << '\n';
    std::vector<double> v(N), sq(N);
    for (int j = 0; j < X.nodes(); ++j) {
        os << X.grid().node(j);
        for (int c = 0; c < m; ++c) {
            for (int p = 0; p < N; ++p) v[p] = X.x(p, j, c);
            double mean = pairwise_sum(v) / N;
            for (int p = 0; p < N; ++p) sq[p] = (v[p] - mean) * (v[p] - mean);
            double var = N > 1 ? pairwise_sum(sq) / (N - 1) : 0.0;
            os << ',' << mean << ',' << std::sqrt(var / N);
        }
        os << '\n';
    }
}

int ledger_command(const ExperimentConfig& cfg, const Output& out, bool first_kind, std::ostream& log) {
    require_kernel(cfg);
    const auto& A = cfg.analysis;
    const char* name = first_kind ? "ledger_first_kind.csv" : "ledger_second_kind.csv";
    BoundLedger ledger;
    try {
        ledger = first_kind ? verify_bound_first_kind(cfg.kernel.spec(), A.ledger_p, A.eps, cfg.time_grid(), A.m_max, A.n_max)
                            : verify_bound_second_kind(cfg.kernel.spec(), A.ledger_p, A.eps, cfg.time_grid(), A.m_max,
                                                       A.n_max);
    } catch (const InfeasibilityError& e) {
        auto os = out.open(name);
        os << "# infeasible=" << e.what() << '\n';
        log << "infeasible: " << e.what() << '\n';
        return kExitVerification;
    }
    auto os = out.open(name);
    os << "# eps=" << ledger.eps << "\n# delta=" << ledger.delta << "\n# c0=" << ledger.c0 << "\n# c_eps=" << ledger.c_eps
       << "\n# eps0=" << ledger.eps0 << '\n';
    ledger.write_csv(os);
    bool ok = ledger.all_satisfied();
    log << "ledger entries=" << ledger.entries.size() << " delta=" << ledger.delta << " all_satisfied=" << ok << '\n';
    return ok ? kExitOk : kExitVerification;
}

int inequality_command(const ExperimentConfig& cfg, const Output& out, std::ostream& log) {
    require_kernel(cfg);
    const auto& A = cfg.analysis;
    const TimeGrid grid = cfg.time_grid();
    auto l = tabulate(cfg.kernel.spec(), grid);
    auto lb = l.pow(A.beta);
    const std::size_t n = static_cast<std::size_t>(grid.steps) + 1;
    std::vector<double> v(n, A.v);
    // M_n from the hypothesis taken as an equality
    std::vector<std::vector<double>> M{std::vector<double>(n, A.m0)};
    for (int k = 1; k <= A.sequence_length; ++k) {
        std::vector<double> pw(n);
        for (std::size_t i = 0; i < n; ++i) pw[i] = std::pow(M.back()[i], A.beta);
        auto I = apply_kernel_operator(lb, pw);
        std::vector<double> next(n);
        for (std::size_t i = 0; i < n; ++i) next[i] = v[i] + std::pow(std::max(I[i], 0.0), 1.0 / A.beta);
        M.push_back(std::move(next));
    }
    auto rep = resolvent_inequality_check(v, l, A.beta, A.p, M);
    auto os = out.open("inequality.csv");
    os << "# max_gap=" << rep.max_gap << "\n# max_hypothesis_excess=" << rep.max_hypothesis_excess << '\n';
    os << "n,t,lhs,rhs,pass\n";
    for (std::size_t k = 0; k < rep.per_n.size(); ++k) {
        const auto& r = rep.per_n[k];
        for (std::size_t i = 0; i < r.t.size(); ++i)
            os << k + 1 << ',' << r.t[i] << ',' << r.lhs[i] << ',' << r.rhs[i] << ',' << (r.pass[i] ? 1 : 0) << '\n';
    }
    log << "sequence length=" << rep.per_n.size() << " max_gap=" << rep.max_gap << " all_pass=" << rep.all_pass << '\n';
    return rep.all_pass ? kExitOk : kExitVerification;
}

int growth_command(const ExperimentConfig& cfg, const RunOptions& opts, const Output& out, std::ostream& log) {
    const auto& A = cfg.analysis;
    auto pr = make_problem(cfg, opts, out.seed());
    auto sol = solve(pr.xi, pr.coef, pr.driver, A.tol, A.max_iters, pr.opts);
    const TimeGrid grid = cfg.time_grid();
    auto gk = growth_kernels(cfg);
    auto k0 = k0_function(gk.k1, gk.k2, A.wp(), grid);
    auto l = transformed_kernel_l(gk.l1, gk.l2, A.wp(), grid);
    std::vector<double> xi(static_cast<std::size_t>(grid.steps) + 1, norm(cfg.coefficients.xi_vector()));
    auto bound = growth_bound_1(k0, l, xi, A.tol * 1e-2);
    auto rep = check_growth_vs_mc(sol.X, sol.xi, bound.values, A.slack, A.p, opts.threads);
    rep.name = "growth";
    auto os = out.open_raw("growth.csv");
    rep.write_csv(os, out.meta_with(A.wp()));
    log << "iterations=" << sol.iterations << " growth all_pass=" << rep.all_pass() << '\n';
    return rep.all_pass() ? kExitOk : kExitVerification;
}

int error_command(const ExperimentConfig& cfg, const RunOptions& opts, const Output& out, std::ostream& log) {
    const auto& A = cfg.analysis;
    auto pr = make_problem(cfg, opts, out.seed());
    auto sol = solve(pr.xi, pr.coef, pr.driver, A.tol, A.max_iters, pr.opts);
    auto it = picard_iterate(pr.xi, pr.coef, pr.driver, A.iterates, pr.opts);
    auto reports = picard_error_reports(cfg, it, sol.X, opts.threads);
    write_picard_reports(out, reports, A.wp());
    bool ok = all_pass(reports);
    log << "iterates=" << A.iterates << " picard error all_pass=" << ok << '\n';
    return ok ? kExitOk : kExitVerification;
}

}  // namespace

int cmd_resolvent(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& log) {
    require_kernel(cfg);
    Output out(cfg, opts);
    const auto& K = cfg.kernel;
    const TimeGrid grid = cfg.time_grid();
    auto k = tabulate(K.spec(), grid);
    {
        auto os = out.open("kernel.csv");
        k.write_csv(os);
    }
    auto stack = iterated_kernels(k, K.n_max);
    for (int n = 1; n <= std::min(K.iterates, K.n_max); ++n) {
        auto os = out.open("iterated_" + std::to_string(n) + ".csv");
        stack[n].write_csv(os);
    }
    auto R = resolvent_sum(stack, K.tol);
    {
        auto os = out.open("resolvent.csv");
        R.R.write_csv(os);
    }
    auto res = resolvent_residual(k, R.R);
    {
        auto os = out.open("residual.csv");
        res.write_csv(os);
    }
    auto I = function_series_I_l(k, K.tol, K.n_max);
    write_series(out.open("I_l.csv"), grid, I.values);
    auto c = l_np_and_c(k, cfg.analysis.p, K.n_max, K.tol).c;
    write_series(out.open("c_lp.csv"), grid, c.values);
    const double resid = max_abs(res);
    {
        auto os = out.open("summary.csv");
        os << "key,value\n";
        os << "resolvent_terms," << R.terms << "\nresolvent_last_sup," << R.last_sup << "\nresidual_max," << resid
           << "\nresolvent_T_0," << R.R.at(grid.steps, 0) << "\nI_l_T," << I.values.back() << "\nI_l_terms," << I.terms
           << "\nc_lp_T," << c.values.back() << "\nc_lp_terms," << c.terms << '\n';
    }
    log << std::setprecision(10) << "resolvent(T,0)=" << R.R.at(grid.steps, 0) << " terms=" << R.terms
        << " residual_max=" << resid << " I_l(T)=" << I.values.back() << " c_lp(T)=" << c.values.back() << '\n';
    return kExitOk;
}

int cmd_solve(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& log) {
    Output out(cfg, opts);
    const auto& A = cfg.analysis;
    auto pr = make_problem(cfg, opts, out.seed());
    auto sol = solve(pr.xi, pr.coef, pr.driver, A.tol, A.max_iters, pr.opts);
    const TimeGrid grid = cfg.time_grid();
    {
        auto os = out.open("increments.csv");
        os << "iteration,increment\n";
        for (std::size_t k = 0; k < sol.increments.size(); ++k) os << k + 1 << ',' << sol.increments[k] << '\n';
    }
    write_series(out.open("residual.csv"), grid, sol.residual);
    write_mean(out, sol.X);
    {
        auto os = out.open_raw("moments.csv");
        moment_function(sol.X, A.p, opts.threads).write_csv(os, out.meta());
    }
    const int K = std::min(A.iterates, sol.iterations);
    std::vector<BoundReport> reports;
    if (K >= 1) {
        auto it = picard_iterate(pr.xi, pr.coef, pr.driver, K, pr.opts);
        reports = picard_error_reports(cfg, it, sol.X, opts.threads);
        write_picard_reports(out, reports, A.wp());
    }
    double holder = std::nan("");
    if (A.holder) {
        holder = holder_exponent(sol.X, A.p, A.lag_min, A.lag_max);
        auto os = out.open("holder.csv");
        os << "p,lag_min,lag_max,exponent\n" << A.p << ',' << A.lag_min << ',' << A.lag_max << ',' << holder << '\n';
    }
    if (cfg.output.paths) {
        auto os = out.open("paths.csv");
        sol.X.write_csv(os);
    }
    double rmax = 0.0;
    for (double r : sol.residual) rmax = std::max(rmax, r);
    {
        auto os = out.open("summary.csv");
        os << "key,value\n";
        os << "iterations," << sol.iterations << "\nlast_increment," << sol.increments.back() << "\nresidual_max," << rmax
           << "\nparticles," << cfg.mc.N << "\nsteps," << grid.steps << "\npicard_error_pass," << all_pass(reports)
           << '\n';
        if (A.holder) os << "holder_exponent," << holder << '\n';
    }
    log << std::setprecision(10) << "iterations=" << sol.iterations << " last_increment=" << sol.increments.back()
        << " residual_max=" << rmax;
    if (A.holder) log << " holder_exponent=" << holder;
    log << '\n';
    return kExitOk;
}

int cmd_verify(const ExperimentConfig& cfg, const std::string& which, const RunOptions& opts, std::ostream& log) {
    Output out(cfg, opts);
    if (which == "bounds_41") return ledger_command(cfg, out, true, log);
    if (which == "bounds_42") return ledger_command(cfg, out, false, log);
    if (which == "inequality_33") return inequality_command(cfg, out, log);
    if (which == "growth") return growth_command(cfg, opts, out, log);
    if (which == "error") return error_command(cfg, opts, out, log);
    throw ConfigError("unknown verification '" + which + "'");
}

int cmd_wasserstein(const std::string& file_a, const std::string& file_b, double p, const std::string& out_dir,
                    std::ostream& log) {
    if (!(p >= 1.0)) throw ConfigError("p must be >= 1");
    auto read = [](const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open '" + path + "'");
        try {
            return DiscreteMeasure::read_csv(in);
        } catch (const DomainError& e) {
            throw ConfigError(path + ": " + e.what());
        } catch (const ConfigError& e) {
            throw ConfigError(path + ": " + e.what());
        }
    };
    auto mu = read(file_a), nu = read(file_b);
    if (mu.dim() != nu.dim()) throw ConfigError("measures live in different dimensions");
    auto r = wasserstein_p(mu, nu, p);
    const std::string dir = out_dir.empty() ? "." : out_dir;
    fs::create_directories(dir);
    std::ofstream os(fs::path(dir) / "plan.csv");
    if (!os) throw Error("cannot write plan.csv");
    ReportMeta meta;
    std::ifstream a(file_a), b(file_b);
    std::stringstream both;
    both << a.rdbuf() << '\n' << b.rdbuf();
    std::ostringstream h;
    h << std::hex << std::setw(16) << std::setfill('0') << fnv1a(both.str() + "p=" + std::to_string(p));
    meta.config_hash = h.str();
    write_meta(os, meta);
    os << "# distance=" << std::setprecision(17) << r.distance << '\n';
    r.plan.write_csv(os);
    log << std::setprecision(17) << "distance=" << r.distance << '\n';
    return kExitOk;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Stochastic Volterra experiment runner", "svlab"};
    app.require_subcommand(1);
    std::string config, out_dir;
    int threads = 1;
    std::uint64_t seed = 0;
    app.add_option("--config", config, "experiment configuration file");
    app.add_option("--out", out_dir, "output directory (overrides output.dir)");
    app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    auto* seed_opt = app.add_option("--seed", seed, "overrides mc.seed");
    app.fallthrough();

    auto* res = app.add_subcommand("resolvent", "iterated kernels, resolvent, I_l and c_{l,p}");
    auto* sol = app.add_subcommand("solve", "Picard solve with moment and error reports");
    auto* ver = app.add_subcommand("verify", "bound checks; exit code 3 on failure");
    std::string which;
    ver->add_option("which", which, "bounds_41 | bounds_42 | inequality_33 | growth | error")
        ->required()
        ->check(CLI::IsMember({"bounds_41", "bounds_42", "inequality_33", "growth", "error"}));
    auto* was = app.add_subcommand("wasserstein", "W_p distance between two CSV measures");
    std::string file_a, file_b;
    double p = 2.0;
    was->add_option("first", file_a, "weight,coords... CSV")->required();
    was->add_option("second", file_b, "weight,coords... CSV")->required();
    was->add_option("--p", p, "order");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*was) return cmd_wasserstein(file_a, file_b, p, out_dir, out);
        if (config.empty()) throw ConfigError("--config is required");
        auto cfg = load_config(config);
        RunOptions opts;
        opts.out_dir = out_dir;
        opts.threads = threads;
        if (*seed_opt) opts.seed = seed;
        if (*res) return cmd_resolvent(cfg, opts, out);
        if (*sol) return cmd_solve(cfg, opts, out);
        return cmd_verify(cfg, which, opts, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const InfeasibilityError& e) {
        err << "verification failed: " << e.what() << '\n';
        return kExitVerification;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitInternal;
    }
}

}  // namespace svlab
