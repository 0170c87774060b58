// Command-line front-end: CSV in, inference results + manifest out.
//
// Exit codes: 0 success, 2 input/validation error, 3 solver failure.

#include <CLI11.hpp>

#include "hdinfer/csv.hpp"
#include "hdinfer/inference.hpp"
#include "hdinfer/qf.hpp"
#include "hdinfer/sim.hpp"
#include "hdinfer/two_sample.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

constexpr const char* kVersion = "0.1.0";

using namespace hdinfer;

struct CommonArgs {
    std::string x_path, y_path, out_path;
    std::string model_name = "linear";
    double alpha = 0.05;
    double rescale = 1.1;
    double prob_filter = 0.05;
    bool no_intercept = false;
    bool header = false;
    std::string beta_init_path;
    double lambda0 = -1.0; // <0: cross-validated
    double mu = -1.0;      // <0: tuned automatically
    std::uint64_t seed = 1;
};

struct TwoSampleArgs {
    std::string x2_path, y2_path, beta_init2_path;
};

struct QuadArgs {
    std::string g_spec;
    std::string a_path; // empty: Sigma target; "identity": I_|G|; else CSV
    std::vector<double> tau = {0.25, 0.5, 1.0};
    bool no_split = false;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool need_out = true) {
    cmd->add_option("--x", a.x_path, "design matrix CSV (rows = observations)")->required();
    cmd->add_option("--y", a.y_path, "outcome vector CSV")->required();
    cmd->add_option("--model", a.model_name, "linear|logistic|logistic_alter");
    cmd->add_option("--alpha", a.alpha, "two-sided CI level is 1-alpha");
    cmd->add_option("--rescale", a.rescale, "standard-error inflation factor");
    cmd->add_option("--prob-filter", a.prob_filter, "probability filter threshold");
    cmd->add_flag("--no-intercept", a.no_intercept, "fit without an intercept");
    cmd->add_flag("--header", a.header, "input CSVs carry a header row");
    cmd->add_option("--beta-init", a.beta_init_path, "initial coefficients CSV");
    cmd->add_option("--lambda", a.lambda0, "fixed penalty level (default: cross-validated)");
    cmd->add_option("--mu", a.mu, "fixed projection radius (default: tuned)");
    cmd->add_option("--seed", a.seed, "seed for CV folds and splits");
    auto* out = cmd->add_option("--out", a.out_path, "results file path");
    if (need_out) out->required();
}

LFOptions to_options(const CommonArgs& a) {
    LFOptions o;
    o.alpha = a.alpha;
    o.rescale = a.rescale;
    o.prob_filter = a.prob_filter;
    o.fit_intercept = !a.no_intercept;
    o.seed = a.seed;
    if (a.lambda0 >= 0.0) o.lambda0 = a.lambda0;
    if (a.mu > 0.0) o.mu = a.mu;
    return o;
}

std::optional<Eigen::VectorXd> load_beta_init(const std::string& path, bool header) {
    if (path.empty()) return std::nullopt;
    return read_csv_vector(path, header);
}

Dataset load_dataset(const std::string& x_path, const std::string& y_path, bool header) {
    Dataset d;
    d.X = read_csv_matrix(x_path, header);
    d.y = read_csv_vector(y_path, header);
    if (d.X.rows() != d.y.size()) {
        throw CsvError("dimension mismatch: X has " + std::to_string(d.X.rows()) +
                       " rows but y has " + std::to_string(d.y.size()) + " entries");
    }
    return d;
}

std::vector<int> parse_g(const std::string& spec) {
    std::vector<int> out;
    auto colon = spec.find(':');
    if (colon != std::string::npos && spec.find(',') == std::string::npos) {
        int a = std::stoi(spec.substr(0, colon));
        int b = std::stoi(spec.substr(colon + 1));
        for (int g = a; g <= b; ++g) out.push_back(g - 1);
        return out;
    }
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok) - 1);
    return out;
}

std::optional<Eigen::MatrixXd> load_a_matrix(const std::string& a_path, std::size_t g_size,
                                             bool header) {
    if (a_path.empty()) return std::nullopt;
    auto m = static_cast<Eigen::Index>(g_size);
    if (a_path == "identity") return Eigen::MatrixXd::Identity(m, m);
    Eigen::MatrixXd A = read_csv_matrix(a_path, header);
    if (A.rows() != m || A.cols() != m) {
        throw CsvError("--a: expected a " + std::to_string(g_size) + "x" +
                       std::to_string(g_size) + " matrix");
    }
    return A;
}

class Manifest {
public:
    Manifest(std::string subcommand, const std::string& out_path)
        : path_(out_path + ".manifest"), start_(std::chrono::steady_clock::now()) {
        add("subcommand", std::move(subcommand));
        add("version", kVersion);
    }
    void add(const std::string& key, const std::string& value) {
        entries_.emplace_back(key, value);
    }
    void add(const std::string& key, double value) { add(key, format_double(value)); }
    void add(const std::string& key, std::uint64_t value) { add(key, std::to_string(value)); }
    void add(const std::string& key, bool value) { add(key, std::string(value ? "1" : "0")); }
    void write() {
        auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - start_).count();
        std::ofstream f(path_);
        if (!f) throw std::runtime_error("cannot write manifest '" + path_ + "'");
        for (const auto& [k, v] : entries_) f << k << " = " << v << "\n";
        f << "wall_time_ms = " << ms << "\n";
    }

private:
    std::string path_;
    std::vector<std::pair<std::string, std::string>> entries_;
    std::chrono::steady_clock::time_point start_;
};

void add_common_manifest(Manifest& m, const CommonArgs& a) {
    m.add("x", a.x_path);
    m.add("y", a.y_path);
    m.add("model", a.model_name);
    m.add("alpha", a.alpha);
    m.add("rescale", a.rescale);
    m.add("prob_filter", a.prob_filter);
    m.add("fit_intercept", !a.no_intercept);
    m.add("seed", a.seed);
    m.add("beta_init", a.beta_init_path.empty() ? "none" : a.beta_init_path);
    m.add("lambda", a.lambda0 >= 0 ? format_double(a.lambda0) : "cv");
    m.add("mu", a.mu > 0 ? format_double(a.mu) : "auto");
}

std::string tau_list(const std::vector<double>& tau) {
    std::string s;
    for (std::size_t i = 0; i < tau.size(); ++i) {
        if (i) s += ",";
        s += format_double(tau[i]);
    }
    return s;
}

int run_lf(const CommonArgs& a, const std::string& loading_path, bool intercept_loading) {
    Manifest manifest("lf", a.out_path);
    add_common_manifest(manifest, a);
    manifest.add("loading", loading_path);
    manifest.add("intercept_loading", intercept_loading);

    Dataset data = load_dataset(a.x_path, a.y_path, a.header);
    Eigen::MatrixXd loadings = read_csv_matrix(loading_path, a.header);
    if (loadings.rows() != data.X.cols()) {
        throw CsvError("loading matrix rows (" + std::to_string(loadings.rows()) +
                       ") must match the covariate count (" + std::to_string(data.X.cols()) + ")");
    }
    LFOptions opts = to_options(a);
    opts.include_intercept_in_loading = intercept_loading;
    ModelKind model = model_from_string(a.model_name);

    auto results = lf(data, loadings, model, opts, load_beta_init(a.beta_init_path, a.header));
    std::vector<std::vector<double>> rows;
    for (std::size_t l = 0; l < results.size(); ++l) {
        const auto& r = results[l];
        rows.push_back({static_cast<double>(l + 1), r.est_plugin, r.est_debias, r.std_err,
                        r.ci_lower, r.ci_upper, r.z_value, r.p_value});
    }
    write_csv(a.out_path,
              {"loading", "est_plugin", "est_debias", "std_err", "ci_lower", "ci_upper", "z", "p"},
              rows);
    manifest.write();
    return 0;
}

int run_qf(const CommonArgs& a, const QuadArgs& q) {
    Manifest manifest("qf", a.out_path);
    add_common_manifest(manifest, a);
    manifest.add("g", q.g_spec);
    manifest.add("a", q.a_path.empty() ? "sigma" : q.a_path);
    manifest.add("tau", tau_list(q.tau));
    manifest.add("split", !q.no_split);

    Dataset data = load_dataset(a.x_path, a.y_path, a.header);
    QFOptions opts;
    opts.G = parse_g(q.g_spec);
    opts.A = load_a_matrix(q.a_path, opts.G.size(), a.header);
    opts.tau = q.tau;
    opts.split = !q.no_split;
    opts.base = to_options(a);
    ModelKind model = model_from_string(a.model_name);

    QFResult res = qf(data, opts, model, load_beta_init(a.beta_init_path, a.header));
    std::vector<std::vector<double>> rows;
    for (const auto& r : res.rows) {
        rows.push_back({r.tau, r.est_plugin, r.est_debias, r.std_err, r.ci_lower, r.ci_upper,
                        r.z_value, r.p_value});
    }
    write_csv(a.out_path,
              {"tau", "est_plugin", "est_debias", "std_err", "ci_lower", "ci_upper", "z", "p"},
              rows);
    manifest.write();
    return 0;
}

int run_cate(const CommonArgs& a, const TwoSampleArgs& t, const std::string& loading_path,
             bool intercept_loading) {
    Manifest manifest("cate", a.out_path);
    add_common_manifest(manifest, a);
    manifest.add("x2", t.x2_path);
    manifest.add("y2", t.y2_path);
    manifest.add("loading", loading_path);
    manifest.add("intercept_loading", intercept_loading);

    TwoSampleData ts;
    ts.sample1 = load_dataset(a.x_path, a.y_path, a.header);
    ts.sample2 = load_dataset(t.x2_path, t.y2_path, a.header);
    Eigen::MatrixXd loadings = read_csv_matrix(loading_path, a.header);
    if (loadings.rows() != ts.sample1.X.cols()) {
        throw CsvError("loading matrix rows must match the covariate count");
    }
    LFOptions opts = to_options(a);
    opts.include_intercept_in_loading = intercept_loading;
    ModelKind model = model_from_string(a.model_name);

    auto results = cate(ts, loadings, model, opts, load_beta_init(a.beta_init_path, a.header),
                        load_beta_init(t.beta_init2_path, a.header));
    std::vector<std::vector<double>> rows;
    for (std::size_t l = 0; l < results.size(); ++l) {
        const auto& lin = results[l].linear_scale;
        const auto& pr = results[l].prob_scale;
        rows.push_back({static_cast<double>(l + 1), 0.0, lin.est_plugin, lin.est_debias,
                        lin.std_err, lin.ci_lower, lin.ci_upper, lin.z_value, lin.p_value});
        rows.push_back({static_cast<double>(l + 1), 1.0, pr.est_plugin, pr.est_debias,
                        pr.std_err, pr.ci_lower, pr.ci_upper, pr.z_value, pr.p_value});
    }
    write_csv(a.out_path,
              {"loading", "probability_scale", "est_plugin", "est_debias", "std_err", "ci_lower",
               "ci_upper", "z", "p"},
              rows);
    manifest.write();
    return 0;
}

int run_cross(const char* name, const CommonArgs& a, const TwoSampleArgs& t, const QuadArgs& q) {
    Manifest manifest(name, a.out_path);
    add_common_manifest(manifest, a);
    manifest.add("x2", t.x2_path);
    manifest.add("y2", t.y2_path);
    manifest.add("g", q.g_spec);
    manifest.add("a", q.a_path.empty() ? "sigma" : q.a_path);
    manifest.add("tau", tau_list(q.tau));
    manifest.add("split", !q.no_split);

    TwoSampleData ts;
    ts.sample1 = load_dataset(a.x_path, a.y_path, a.header);
    ts.sample2 = load_dataset(t.x2_path, t.y2_path, a.header);
    CrossOptions opts;
    opts.G = parse_g(q.g_spec);
    opts.A = load_a_matrix(q.a_path, opts.G.size(), a.header);
    opts.tau = q.tau;
    opts.split = !q.no_split;
    opts.base = to_options(a);
    ModelKind model = model_from_string(a.model_name);
    auto b1 = load_beta_init(a.beta_init_path, a.header);
    auto b2 = load_beta_init(t.beta_init2_path, a.header);

    CrossResult res = std::string(name) == "innprod" ? inner_product(ts, opts, model, b1, b2)
                                                     : distance(ts, opts, model, b1, b2);
    if (res.gram_mismatch) {
        std::cerr << "warning: per-sample Gram matrices differ by more than 20% "
                     "(Frobenius); the pooled Sigma target assumes a shared design\n";
    }
    std::vector<std::vector<double>> rows;
    for (const auto& r : res.rows) {
        rows.push_back({r.tau, r.est_plugin, r.est_debias, r.std_err, r.ci_lower, r.ci_upper,
                        r.z_value, r.p_value});
    }
    write_csv(a.out_path,
              {"tau", "est_plugin", "est_debias", "std_err", "ci_lower", "ci_upper", "z", "p"},
              rows);
    manifest.write();
    return 0;
}

int run_simulate(const std::string& config_path, int reps_override,
                 std::int64_t seed_override, const std::string& out_path,
                 const std::string& per_rep_path) {
    Manifest manifest("simulate", out_path);
    manifest.add("config", config_path);

    SimConfig cfg = SimConfig::from_file(config_path);
    if (reps_override > 0) cfg.reps = reps_override;
    if (seed_override >= 0) cfg.base_seed = static_cast<std::uint64_t>(seed_override);
    manifest.add("reps", static_cast<std::uint64_t>(cfg.reps));
    manifest.add("seed", cfg.base_seed);

    McOutcome outcome = run_mc(cfg);
    write_mc_report(outcome, out_path);
    if (!per_rep_path.empty()) write_rep_csv(outcome, per_rep_path);
    for (const auto& r : outcome.reports) {
        std::cout << "key=" << r.key << " truth=" << format_double(r.truth)
                  << " coverage=" << format_double(r.coverage)
                  << " avg_ci_length=" << format_double(r.avg_ci_length) << " failures="
                  << r.failures << "/" << r.reps << (r.error_grade ? " [ERROR-GRADE]" : "")
                  << "\n";
    }
    manifest.write();
    return 0;
}

int run_plotdata(const std::string& results_path, const std::string& out_path) {
    CsvTable table = read_csv_table(results_path);
    int lo_col = table.column_index("ci_lower");
    int hi_col = table.column_index("ci_upper");
    if (lo_col < 0 || hi_col < 0) {
        throw CsvError(results_path + ": results file lacks ci_lower/ci_upper columns");
    }
    std::ofstream f(out_path);
    if (!f) throw std::runtime_error("cannot write '" + out_path + "'");
    f << "index,ci_lower,ci_upper,sign\n";
    long positive = 0, negative = 0, spans_zero = 0;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::string& lo_s = row[static_cast<std::size_t>(lo_col)];
        const std::string& hi_s = row[static_cast<std::size_t>(hi_col)];
        double lo = std::stod(lo_s);
        double hi = std::stod(hi_s);
        const char* sign;
        if (lo > 0.0) {
            sign = "positive";
            ++positive;
        } else if (hi < 0.0) {
            sign = "negative";
            ++negative;
        } else {
            sign = "spans_zero";
            ++spans_zero;
        }
        // echo the interval strings verbatim so round-trips stay bit-exact
        f << (i + 1) << "," << lo_s << "," << hi_s << "," << sign << "\n";
    }
    std::cout << "positive=" << positive << " negative=" << negative
              << " spans_zero=" << spans_zero << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hdinfer: debiased confidence intervals for high-dimensional "
                 "linear and logistic regression"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    CommonArgs lf_a, qf_a, cate_a, inn_a, dist_a;
    TwoSampleArgs cate_t, inn_t, dist_t;
    QuadArgs qf_q, inn_q, dist_q;
    std::string lf_loading, cate_loading;
    bool lf_il = false, cate_il = false;

    auto* lf_cmd = app.add_subcommand("lf", "linear functional x_new' beta");
    add_common(lf_cmd, lf_a);
    lf_cmd->add_option("--loading", lf_loading, "loading matrix CSV (columns = loadings)")
        ->required();
    lf_cmd->add_flag("--intercept-loading", lf_il, "include the intercept in the objective");

    auto* qf_cmd = app.add_subcommand("qf", "quadratic functional beta_G' A beta_G");
    add_common(qf_cmd, qf_a);
    qf_cmd->add_option("--g", qf_q.g_spec, "index set, e.g. 40:60 or 1,2,5 (1-based)")->required();
    qf_cmd->add_option("--a", qf_q.a_path, "matrix A CSV or 'identity' (default: Sigma_GG)");
    qf_cmd->add_option("--tau", qf_q.tau, "variance enlargement values");
    qf_cmd->add_flag("--no-split", qf_q.no_split, "disable sample splitting");

    auto* cate_cmd = app.add_subcommand("cate", "two-sample contrast of linear functionals");
    add_common(cate_cmd, cate_a);
    cate_cmd->add_option("--x2", cate_t.x2_path, "second-sample design CSV")->required();
    cate_cmd->add_option("--y2", cate_t.y2_path, "second-sample outcome CSV")->required();
    cate_cmd->add_option("--beta-init2", cate_t.beta_init2_path, "second-sample coefficients");
    cate_cmd->add_option("--loading", cate_loading, "loading matrix CSV")->required();
    cate_cmd->add_flag("--intercept-loading", cate_il, "include the intercept in the objective");

    auto* inn_cmd = app.add_subcommand("innprod", "inner product beta1_G' A beta2_G");
    add_common(inn_cmd, inn_a);
    inn_cmd->add_option("--x2", inn_t.x2_path, "second-sample design CSV")->required();
    inn_cmd->add_option("--y2", inn_t.y2_path, "second-sample outcome CSV")->required();
    inn_cmd->add_option("--beta-init2", inn_t.beta_init2_path, "second-sample coefficients");
    inn_cmd->add_option("--g", inn_q.g_spec, "index set (1-based)")->required();
    inn_cmd->add_option("--a", inn_q.a_path, "matrix A CSV or 'identity'");
    inn_cmd->add_option("--tau", inn_q.tau, "variance enlargement values");
    inn_cmd->add_flag("--no-split", inn_q.no_split, "disable sample splitting");

    auto* dist_cmd = app.add_subcommand("dist", "distance gamma_G' A gamma_G");
    add_common(dist_cmd, dist_a);
    dist_cmd->add_option("--x2", dist_t.x2_path, "second-sample design CSV")->required();
    dist_cmd->add_option("--y2", dist_t.y2_path, "second-sample outcome CSV")->required();
    dist_cmd->add_option("--beta-init2", dist_t.beta_init2_path, "second-sample coefficients");
    dist_cmd->add_option("--g", dist_q.g_spec, "index set (1-based)")->required();
    dist_cmd->add_option("--a", dist_q.a_path, "matrix A CSV or 'identity'");
    dist_cmd->add_option("--tau", dist_q.tau, "variance enlargement values");
    dist_cmd->add_flag("--no-split", dist_q.no_split, "disable sample splitting");

    std::string sim_config, sim_out, sim_per_rep;
    int sim_reps = -1;
    std::int64_t sim_seed = -1;
    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo coverage study");
    sim_cmd->add_option("--config", sim_config, "study configuration file")->required();
    sim_cmd->add_option("--reps", sim_reps, "override replication count");
    sim_cmd->add_option("--seed", sim_seed, "override base seed");
    sim_cmd->add_option("--out", sim_out, "report file path")->required();
    sim_cmd->add_option("--per-rep", sim_per_rep, "optional per-replication CSV");

    std::string plot_results, plot_out;
    auto* plot_cmd = app.add_subcommand("plotdata", "classify CIs for plotting");
    plot_cmd->add_option("--results", plot_results, "results file from a prior run")->required();
    plot_cmd->add_option("--out", plot_out, "plot-data CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (lf_cmd->parsed()) return run_lf(lf_a, lf_loading, lf_il);
        if (qf_cmd->parsed()) return run_qf(qf_a, qf_q);
        if (cate_cmd->parsed()) return run_cate(cate_a, cate_t, cate_loading, cate_il);
        if (inn_cmd->parsed()) return run_cross("innprod", inn_a, inn_t, inn_q);
        if (dist_cmd->parsed()) return run_cross("dist", dist_a, dist_t, dist_q);
        if (sim_cmd->parsed()) return run_simulate(sim_config, sim_reps, sim_seed, sim_out,
                                                   sim_per_rep);
        if (plot_cmd->parsed()) return run_plotdata(plot_results, plot_out);
    } catch (const SolveError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return 3;
    } catch (const NonConvergenceError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
