#pragma once

#include "hdinfer/model.hpp"
#include "hdinfer/rng.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hdinfer {

enum class CovKind { Identity, Ar1 };
enum class TargetKind { LF, QF, CATE, InnProd, Dist };

/// Sparse coefficient spec: (index, value) pairs, 0-based.
using SparseVec = std::vector<std::pair<int, double>>;

Eigen::VectorXd densify(const SparseVec& spec, int p);

struct SimConfig {
    TargetKind target = TargetKind::LF;
    ModelKind model = ModelKind::Linear;
    int n1 = 0;
    int n2 = 0; // 0: one-sample
    int p = 0;
    CovKind cov1 = CovKind::Identity;
    CovKind cov2 = CovKind::Identity;
    double rho1 = 0.0;
    double rho2 = 0.0;
    SparseVec beta1; // the only beta for one-sample targets
    SparseVec beta2;
    double a0_1 = 0.0;
    double a0_2 = 0.0;
    std::vector<SparseVec> loadings; // LF / CATE
    std::vector<int> G;              // QF / InnProd / Dist, 0-based
    bool A_identity = false;         // true: A = I_|G|; false: Sigma_{G,G} target
    std::vector<double> tau = {0.25, 0.5, 1.0};
    bool split = true;
    double alpha = 0.05;
    double rescale = 1.1;
    double prob_filter = 0.05;
    int reps = 1;
    std::uint64_t base_seed = 42;
    std::optional<double> stub_halfwidth; // test hook: skip inference, CI = truth +/- h

    static SimConfig from_file(const std::string& path);
    void validate() const;
};

struct MCReport {
    std::string key; // loading index / tau / scale the row refers to
    double truth = 0.0;
    double coverage = 0.0;
    double avg_ci_length = 0.0;
    double mean_abs_bias_plugin = 0.0;
    double mean_abs_bias_debias = 0.0;
    int failures = 0;
    int reps = 0;
    bool error_grade = false; // more than 10% of reps failed
};

struct RepRecord {
    int rep = 0;
    bool failed = false;
    std::string error;
    std::vector<double> est_plugin, est_debias, ci_lower, ci_upper;
};

struct McOutcome {
    std::vector<std::string> keys;
    std::vector<double> truths;
    std::vector<MCReport> reports;
    std::vector<RepRecord> records;
};

/// Rows i.i.d. N(0, Sigma), Sigma identity or AR(rho). The AR rows come
/// from the exact lower-triangular Cholesky recursion
/// x_j = rho x_{j-1} + sqrt(1-rho^2) z_j applied to Box-Muller normals.
Eigen::MatrixXd gen_design(int n, int p, CovKind cov, double rho, Rng& rng);

/// Linear: a0 + X beta + N(0,1) noise (skipped when noiseless); binary:
/// Bernoulli(f(a0 + X beta)).
Eigen::VectorXd gen_outcome(const Eigen::MatrixXd& X, const Eigen::VectorXd& beta, double a0,
                            ModelKind model, Rng& rng, bool noiseless = false);

/// Analytic truth per report key; Sigma-targets use the closed-form
/// rho^{|j-k|} covariance, never samples.
std::vector<double> truth_of(const SimConfig& config);
std::vector<std::string> report_keys(const SimConfig& config);

/// Runs the configured study; deterministic in (config, base_seed)
/// regardless of thread count (HDINFER_THREADS caps workers).
McOutcome run_mc(const SimConfig& config);

void write_mc_report(const McOutcome& outcome, const std::string& path);
void write_rep_csv(const McOutcome& outcome, const std::string& path);

} // namespace hdinfer
