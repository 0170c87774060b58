#include "hdinfer/sim.hpp"

#include "hdinfer/inference.hpp"
#include "hdinfer/qf.hpp"
#include "hdinfer/two_sample.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace hdinfer {

Eigen::VectorXd densify(const SparseVec& spec, int p) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(p);
    for (const auto& [idx, val] : spec) {
        if (idx < 0 || idx >= p) throw std::invalid_argument("sparse index out of range");
        v[idx] = val;
    }
    return v;
}

namespace {

std::string trim(const std::string& s) {
    auto a = s.find_first_not_of(" \t\r\n");
    auto b = s.find_last_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

// "1:0.5, 2:1" with 1-based indices
SparseVec parse_sparse(const std::string& s) {
    SparseVec out;
    for (const auto& tok : split_commas(s)) {
        auto colon = tok.find(':');
        if (colon == std::string::npos) {
            throw std::invalid_argument("expected index:value pairs, got '" + tok + "'");
        }
        int idx = std::stoi(tok.substr(0, colon));
        double val = std::stod(tok.substr(colon + 1));
        out.emplace_back(idx - 1, val);
    }
    return out;
}

// "40:60" (inclusive range) or "1,2,5"; 1-based
std::vector<int> parse_index_set(const std::string& s) {
    std::vector<int> out;
    auto colon = s.find(':');
    if (colon != std::string::npos && s.find(',') == std::string::npos) {
        int a = std::stoi(trim(s.substr(0, colon)));
        int b = std::stoi(trim(s.substr(colon + 1)));
        for (int g = a; g <= b; ++g) out.push_back(g - 1);
        return out;
    }
    for (const auto& tok : split_commas(s)) out.push_back(std::stoi(tok) - 1);
    return out;
}

bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw std::invalid_argument("expected a boolean, got '" + s + "'");
}

CovKind parse_cov(const std::string& s) {
    if (s == "identity") return CovKind::Identity;
    if (s == "ar1") return CovKind::Ar1;
    throw std::invalid_argument("cov must be identity or ar1, got '" + s + "'");
}

TargetKind parse_target(const std::string& s) {
    if (s == "lf") return TargetKind::LF;
    if (s == "qf") return TargetKind::QF;
    if (s == "cate") return TargetKind::CATE;
    if (s == "innprod") return TargetKind::InnProd;
    if (s == "dist") return TargetKind::Dist;
    throw std::invalid_argument("unknown target '" + s + "'");
}

} // namespace

SimConfig SimConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file '" + path + "'");
    SimConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                        ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        try {
            if (key == "target") cfg.target = parse_target(val);
            else if (key == "model") cfg.model = model_from_string(val);
            else if (key == "n" || key == "n1") cfg.n1 = std::stoi(val);
            else if (key == "n2") cfg.n2 = std::stoi(val);
            else if (key == "p") cfg.p = std::stoi(val);
            else if (key == "cov" || key == "cov1") cfg.cov1 = parse_cov(val);
            else if (key == "cov2") cfg.cov2 = parse_cov(val);
            else if (key == "rho" || key == "rho1") cfg.rho1 = std::stod(val);
            else if (key == "rho2") cfg.rho2 = std::stod(val);
            else if (key == "beta" || key == "beta1") cfg.beta1 = parse_sparse(val);
            else if (key == "beta2") cfg.beta2 = parse_sparse(val);
            else if (key == "a0" || key == "a01") cfg.a0_1 = std::stod(val);
            else if (key == "a02") cfg.a0_2 = std::stod(val);
            else if (key == "loading") cfg.loadings.push_back(parse_sparse(val));
            else if (key == "g") cfg.G = parse_index_set(val);
            else if (key == "A") cfg.A_identity = (val == "identity");
            else if (key == "tau") {
                cfg.tau.clear();
                for (const auto& t : split_commas(val)) cfg.tau.push_back(std::stod(t));
            }
            else if (key == "split") cfg.split = parse_bool(val);
            else if (key == "alpha") cfg.alpha = std::stod(val);
            else if (key == "rescale") cfg.rescale = std::stod(val);
            else if (key == "prob_filter") cfg.prob_filter = std::stod(val);
            else if (key == "reps") cfg.reps = std::stoi(val);
            else if (key == "seed") cfg.base_seed = std::stoull(val);
            else if (key == "stub_halfwidth") cfg.stub_halfwidth = std::stod(val);
            else throw std::invalid_argument("unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception& e) {
            throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

void SimConfig::validate() const {
    if (reps < 1) throw std::invalid_argument("sim: reps must be >= 1");
    if (n1 < 2 || p < 1) throw std::invalid_argument("sim: need n >= 2 and p >= 1");
    bool two_sample = (target == TargetKind::CATE || target == TargetKind::InnProd ||
                       target == TargetKind::Dist);
    if (two_sample && n2 < 2) throw std::invalid_argument("sim: two-sample target needs n2");
    if (cov1 == CovKind::Ar1 && !(std::fabs(rho1) < 1.0)) {
        throw std::invalid_argument("sim: |rho| must be < 1");
    }
    if (cov2 == CovKind::Ar1 && !(std::fabs(rho2) < 1.0)) {
        throw std::invalid_argument("sim: |rho| must be < 1");
    }
    if ((target == TargetKind::LF || target == TargetKind::CATE) && loadings.empty()) {
        throw std::invalid_argument("sim: lf/cate target needs at least one loading");
    }
    if ((target == TargetKind::QF || target == TargetKind::InnProd ||
         target == TargetKind::Dist) && G.empty()) {
        throw std::invalid_argument("sim: quadratic target needs g");
    }
    for (const auto& [idx, val] : beta1) {
        (void)val;
        if (idx < 0 || idx >= p) throw std::invalid_argument("sim: beta index out of range");
    }
    for (const auto& [idx, val] : beta2) {
        (void)val;
        if (idx < 0 || idx >= p) throw std::invalid_argument("sim: beta index out of range");
    }
    for (int g : G) {
        if (g < 0 || g >= p) throw std::invalid_argument("sim: g index out of range");
    }
}

Eigen::MatrixXd gen_design(int n, int p, CovKind cov, double rho, Rng& rng) {
    if (cov == CovKind::Ar1 && !(std::fabs(rho) < 1.0)) {
        throw std::invalid_argument("gen_design: AR(1) needs |rho| < 1");
    }
    Eigen::MatrixXd X(n, p);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) X(i, j) = rng.normal();
    }
    if (cov == CovKind::Ar1) {
        double s = std::sqrt(1.0 - rho * rho);
        for (int i = 0; i < n; ++i) {
            for (int j = 1; j < p; ++j) X(i, j) = rho * X(i, j - 1) + s * X(i, j);
        }
    }
    return X;
}

Eigen::VectorXd gen_outcome(const Eigen::MatrixXd& X, const Eigen::VectorXd& beta, double a0,
                            ModelKind model, Rng& rng, bool noiseless) {
    Eigen::VectorXd eta = X * beta;
    eta.array() += a0;
    Eigen::VectorXd y(X.rows());
    if (model == ModelKind::Linear) {
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            y[i] = eta[i] + (noiseless ? 0.0 : rng.normal());
        }
    } else {
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            y[i] = rng.uniform() < link_value(model, eta[i]) ? 1.0 : 0.0;
        }
    }
    return y;
}

namespace {

Eigen::MatrixXd analytic_sigma_gg(const SimConfig& cfg, CovKind cov, double rho) {
    auto m = static_cast<Eigen::Index>(cfg.G.size());
    Eigen::MatrixXd S(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
        for (Eigen::Index b = 0; b < m; ++b) {
            int da = cfg.G[static_cast<std::size_t>(a)];
            int db = cfg.G[static_cast<std::size_t>(b)];
            S(a, b) = (cov == CovKind::Identity) ? (da == db ? 1.0 : 0.0)
                                                 : std::pow(rho, std::abs(da - db));
        }
    }
    return S;
}

Eigen::MatrixXd truth_target_matrix(const SimConfig& cfg) {
    auto m = static_cast<Eigen::Index>(cfg.G.size());
    if (cfg.A_identity) return Eigen::MatrixXd::Identity(m, m);
    bool two_sample = (cfg.target == TargetKind::InnProd || cfg.target == TargetKind::Dist);
    if (two_sample) {
        if (cfg.cov1 != cfg.cov2 || cfg.rho1 != cfg.rho2) {
            throw std::invalid_argument(
                "truth_of: Sigma target needs matching design covariances across samples");
        }
    }
    return analytic_sigma_gg(cfg, cfg.cov1, cfg.rho1);
}

Eigen::VectorXd sub_G(const Eigen::VectorXd& v, const std::vector<int>& G) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(G.size()));
    for (std::size_t k = 0; k < G.size(); ++k) out[static_cast<Eigen::Index>(k)] = v[G[k]];
    return out;
}

} // namespace

std::vector<std::string> report_keys(const SimConfig& cfg) {
    std::vector<std::string> keys;
    switch (cfg.target) {
        case TargetKind::LF:
            for (std::size_t l = 0; l < cfg.loadings.size(); ++l) {
                keys.push_back("loading" + std::to_string(l + 1));
            }
            break;
        case TargetKind::CATE:
            for (std::size_t l = 0; l < cfg.loadings.size(); ++l) {
                keys.push_back("loading" + std::to_string(l + 1) + ":linear");
                keys.push_back("loading" + std::to_string(l + 1) + ":probability");
            }
            break;
        default:
            for (double t : cfg.tau) {
                std::ostringstream os;
                os << "tau=" << t;
                keys.push_back(os.str());
            }
    }
    return keys;
}

std::vector<double> truth_of(const SimConfig& cfg) {
    cfg.validate();
    Eigen::VectorXd b1 = densify(cfg.beta1, cfg.p);
    Eigen::VectorXd b2 = densify(cfg.beta2, cfg.p);
    std::vector<double> truths;
    switch (cfg.target) {
        case TargetKind::LF: {
            for (const auto& spec : cfg.loadings) {
                truths.push_back(densify(spec, cfg.p).dot(b1));
            }
            break;
        }
        case TargetKind::CATE: {
            for (const auto& spec : cfg.loadings) {
                Eigen::VectorXd x = densify(spec, cfg.p);
                double lin = x.dot(b2) - x.dot(b1);
                double prob = link_value(cfg.model, x.dot(b2)) - link_value(cfg.model, x.dot(b1));
                truths.push_back(lin);
                truths.push_back(prob);
            }
            break;
        }
        case TargetKind::QF: {
            Eigen::MatrixXd T = truth_target_matrix(cfg);
            Eigen::VectorXd g = sub_G(b1, cfg.G);
            double v = g.dot(T * g);
            truths.assign(cfg.tau.size(), v);
            break;
        }
        case TargetKind::InnProd: {
            Eigen::MatrixXd T = truth_target_matrix(cfg);
            double v = sub_G(b1, cfg.G).dot(T * sub_G(b2, cfg.G));
            truths.assign(cfg.tau.size(), v);
            break;
        }
        case TargetKind::Dist: {
            Eigen::MatrixXd T = truth_target_matrix(cfg);
            Eigen::VectorXd g = sub_G(b2 - b1, cfg.G);
            truths.assign(cfg.tau.size(), g.dot(T * g));
            break;
        }
    }
    return truths;
}

namespace {

int thread_budget(int reps) {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    if (const char* env = std::getenv("HDINFER_THREADS")) {
        try {
            int req = std::stoi(env);
            if (req >= 1) hw = req;
        } catch (...) {
            // ignore malformed env values
        }
    }
    return std::max(1, std::min(hw, reps));
}

void run_one_rep(const SimConfig& cfg, int rep, const std::vector<double>& truths,
                 RepRecord& rec) {
    rec.rep = rep;
    std::size_t nkeys = truths.size();
    if (cfg.stub_halfwidth) {
        double h = *cfg.stub_halfwidth;
        for (std::size_t k = 0; k < nkeys; ++k) {
            rec.est_plugin.push_back(truths[k]);
            rec.est_debias.push_back(truths[k]);
            rec.ci_lower.push_back(truths[k] - h);
            rec.ci_upper.push_back(truths[k] + h);
        }
        return;
    }

    std::uint64_t rep_seed = Rng::derive(cfg.base_seed, static_cast<std::uint64_t>(rep));
    Rng rng1 = Rng::substream(rep_seed, 1);
    Rng rng2 = Rng::substream(rep_seed, 2);
    std::uint64_t fit_seed = Rng::derive(rep_seed, 3);

    Eigen::VectorXd b1 = densify(cfg.beta1, cfg.p);
    Dataset d1;
    d1.X = gen_design(cfg.n1, cfg.p, cfg.cov1, cfg.rho1, rng1);
    d1.y = gen_outcome(d1.X, b1, cfg.a0_1, cfg.model, rng1);

    LFOptions base;
    base.alpha = cfg.alpha;
    base.rescale = cfg.rescale;
    base.prob_filter = cfg.prob_filter;
    base.seed = fit_seed;

    auto push = [&](double plugin, double debias, double lo, double hi) {
        rec.est_plugin.push_back(plugin);
        rec.est_debias.push_back(debias);
        rec.ci_lower.push_back(lo);
        rec.ci_upper.push_back(hi);
    };

    if (cfg.target == TargetKind::LF) {
        Eigen::MatrixXd L(cfg.p, static_cast<Eigen::Index>(cfg.loadings.size()));
        for (std::size_t l = 0; l < cfg.loadings.size(); ++l) {
            L.col(static_cast<Eigen::Index>(l)) = densify(cfg.loadings[l], cfg.p);
        }
        auto results = lf(d1, L, cfg.model, base);
        for (const auto& r : results) push(r.est_plugin, r.est_debias, r.ci_lower, r.ci_upper);
        return;
    }
    if (cfg.target == TargetKind::QF) {
        QFOptions q;
        q.G = cfg.G;
        if (cfg.A_identity) {
            q.A = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(cfg.G.size()),
                                            static_cast<Eigen::Index>(cfg.G.size()));
        }
        q.tau = cfg.tau;
        q.split = cfg.split;
        q.base = base;
        QFResult r = qf(d1, q, cfg.model);
        for (const auto& row : r.rows) {
            push(row.est_plugin, row.est_debias, row.ci_lower, row.ci_upper);
        }
        return;
    }

    // two-sample targets
    Eigen::VectorXd b2 = densify(cfg.beta2, cfg.p);
    TwoSampleData ts;
    ts.sample1 = std::move(d1);
    ts.sample2.X = gen_design(cfg.n2, cfg.p, cfg.cov2, cfg.rho2, rng2);
    ts.sample2.y = gen_outcome(ts.sample2.X, b2, cfg.a0_2, cfg.model, rng2);

    if (cfg.target == TargetKind::CATE) {
        Eigen::MatrixXd L(cfg.p, static_cast<Eigen::Index>(cfg.loadings.size()));
        for (std::size_t l = 0; l < cfg.loadings.size(); ++l) {
            L.col(static_cast<Eigen::Index>(l)) = densify(cfg.loadings[l], cfg.p);
        }
        auto results = cate(ts, L, cfg.model, base);
        for (const auto& r : results) {
            push(r.linear_scale.est_plugin, r.linear_scale.est_debias,
                 r.linear_scale.ci_lower, r.linear_scale.ci_upper);
            push(r.prob_scale.est_plugin, r.prob_scale.est_debias, r.prob_scale.ci_lower,
                 r.prob_scale.ci_upper);
        }
        return;
    }

    CrossOptions c;
    c.G = cfg.G;
    if (cfg.A_identity) {
        c.A = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(cfg.G.size()),
                                        static_cast<Eigen::Index>(cfg.G.size()));
    }
    c.tau = cfg.tau;
    c.split = cfg.split;
    c.base = base;
    CrossResult r = (cfg.target == TargetKind::InnProd) ? inner_product(ts, c, cfg.model)
                                                        : distance(ts, c, cfg.model);
    for (const auto& row : r.rows) {
        push(row.est_plugin, row.est_debias, row.ci_lower, row.ci_upper);
    }
}

} // namespace

McOutcome run_mc(const SimConfig& cfg) {
    cfg.validate();
    McOutcome out;
    out.keys = report_keys(cfg);
    out.truths = truth_of(cfg);
    out.records.assign(static_cast<std::size_t>(cfg.reps), RepRecord{});

    int workers = thread_budget(cfg.reps);
    auto work = [&](int t) {
        for (int rep = t; rep < cfg.reps; rep += workers) {
            RepRecord& rec = out.records[static_cast<std::size_t>(rep)];
            try {
                run_one_rep(cfg, rep, out.truths, rec);
            } catch (const std::exception& e) {
                rec.rep = rep;
                rec.failed = true;
                rec.error = e.what();
            }
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < workers; ++t) pool.emplace_back(work, t);
        for (auto& th : pool) th.join();
    }

    int failures = 0;
    for (const auto& rec : out.records) failures += rec.failed ? 1 : 0;
    bool error_grade = failures * 10 > cfg.reps;

    for (std::size_t k = 0; k < out.keys.size(); ++k) {
        MCReport r;
        r.key = out.keys[k];
        r.truth = out.truths[k];
        r.failures = failures;
        r.reps = cfg.reps;
        r.error_grade = error_grade;
        int used = 0, covered = 0;
        double len = 0.0, bias_p = 0.0, bias_d = 0.0;
        for (const auto& rec : out.records) {
            if (rec.failed) continue;
            ++used;
            double lo = rec.ci_lower[k], hi = rec.ci_upper[k];
            if (lo <= r.truth && r.truth <= hi) ++covered;
            len += hi - lo;
            bias_p += std::fabs(rec.est_plugin[k] - r.truth);
            bias_d += std::fabs(rec.est_debias[k] - r.truth);
        }
        if (used > 0) {
            r.coverage = static_cast<double>(covered) / used;
            r.avg_ci_length = len / used;
            r.mean_abs_bias_plugin = bias_p / used;
            r.mean_abs_bias_debias = bias_d / used;
        }
        out.reports.push_back(std::move(r));
    }
    return out;
}

void write_mc_report(const McOutcome& outcome, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write report to '" + path + "'");
    f.precision(17);
    for (const auto& r : outcome.reports) {
        f << "key = " << r.key << "\n"
          << "truth = " << r.truth << "\n"
          << "coverage = " << r.coverage << "\n"
          << "avg_ci_length = " << r.avg_ci_length << "\n"
          << "mean_abs_bias_plugin = " << r.mean_abs_bias_plugin << "\n"
          << "mean_abs_bias_debias = " << r.mean_abs_bias_debias << "\n"
          << "failures = " << r.failures << "\n"
          << "reps = " << r.reps << "\n"
          << "error_grade = " << (r.error_grade ? 1 : 0) << "\n"
          << "---\n";
    }
}

void write_rep_csv(const McOutcome& outcome, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write per-rep csv to '" + path + "'");
    f.precision(17);
    f << "rep,failed,key,est_plugin,est_debias,ci_lower,ci_upper\n";
    for (const auto& rec : outcome.records) {
        if (rec.failed) {
            f << rec.rep << ",1,,,,,\n";
            continue;
        }
        for (std::size_t k = 0; k < outcome.keys.size(); ++k) {
            f << rec.rep << ",0," << outcome.keys[k] << "," << rec.est_plugin[k] << ","
              << rec.est_debias[k] << "," << rec.ci_lower[k] << "," << rec.ci_upper[k] << "\n";
        }
    }
}

} // namespace hdinfer
