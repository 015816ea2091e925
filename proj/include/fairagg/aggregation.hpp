#pragma once

// Opinion aggregation models mapping (weighted) labels to soft labels:
// majority voting, Dawid-Skene fit by EM, and Soft D&S fit by alternating
// MAP maximization under Dirichlet priors.
//
// Label weights enter every model as fractional label counts: a label with
// weight w contributes w times its log-likelihood term.

#include "fairagg/simplex.hpp"
#include "fairagg/types.hpp"

#include <span>
#include <vector>

namespace fairagg {

/// Weighted class ratio per task. Throws ValidationError for a task with no labels.
SoftLabels mv_aggregate(const WeightedLabels& data);

// ---------------------------------------------------------------------------
// Dawid-Skene

/// q(T_j = k) proportional to rho_k * prod pi^(i)_{k, X_ij}^{w_ij}, evaluated in
/// log space. Log-probabilities are floored at kProbabilityFloor.
SoftLabels ds_e_step(std::span<const ConfusionMatrix> confusions, const Eigen::VectorXd& prior,
                     const WeightedLabels& data);
inline SoftLabels ds_e_step(const DsModelState& state, const WeightedLabels& data) {
    return ds_e_step(state.confusions, state.prior, data);
}

/// Closed-form maximizers of the EM lower bound given q. Rows whose weighted
/// count is zero become uniform. The returned state carries `q` as posteriors.
DsModelState ds_m_step(const SoftLabels& q, const WeightedLabels& data);

/// EM lower bound on ln p(X | pi, rho) at the state's posteriors q, with
/// 0 ln 0 = 0 and log-probabilities floored as in the E-step.
double ds_lower_bound(const DsModelState& state, const WeightedLabels& data);

struct DsFitOptions {
    double tol = 1e-6;  ///< on max |delta q|
    int max_iter = 500;
};

struct FitResult {
    DsModelState state;
    /// Objective after every iteration (lower bound for D&S, log posterior
    /// for Soft D&S); element 0 is the value at initialization.
    std::vector<double> objective_trace;
    int iterations = 0;
    bool converged = false;
};

FitResult ds_fit(const WeightedLabels& data, const SoftLabels& init, const DsFitOptions& options = {});
/// Majority-vote initialization.
FitResult ds_fit(const WeightedLabels& data, const DsFitOptions& options = {});

// ---------------------------------------------------------------------------
// Soft D&S

/// Log posterior
///   sum_{i,k} ln Dir(pi^(i)_k | alpha_k) + sum_j ln Dir(Z_j | rho)
///     + sum_{i,j} w_ij ln(sum_k pi^(i)_{k, X_ij} Z_jk)
/// using unnormalized Dirichlet kernels (sum (a - 1) ln x); probabilities
/// are floored at kProbabilityFloor inside logarithms.
double log_posterior(const DsModelState& state, const WeightedLabels& data, const DirichletHyper& hyper);

struct PosteriorGradient {
    std::vector<Eigen::MatrixXd> confusions;
    Eigen::MatrixXd soft_labels;
};

/// Analytic gradient of log_posterior with respect to every pi^(i) and Z.
PosteriorGradient log_posterior_gradient(const DsModelState& state, const WeightedLabels& data,
                                         const DirichletHyper& hyper);

struct SoftDsOptions {
    double tol = 1e-6;  ///< on relative improvement of the log posterior
    int max_iter = 100;
    /// When false the confusions stay at their initial values.
    bool update_confusions = true;
    /// Starting confusions; defaults to the row-normalized alpha.
    std::vector<ConfusionMatrix> initial_confusions;
    /// Starting soft labels; defaults to majority voting.
    SoftLabels initial_soft_labels;
    SimplexOptions inner;
};

FitResult soft_ds_fit(const WeightedLabels& data, const DirichletHyper& hyper, const SoftDsOptions& options = {});

/// Row-normalized alpha: the mean of the confusion-row prior.
ConfusionMatrix prior_mean_confusion(const DirichletHyper& hyper);

namespace detail {

/// Soft D&S objective for one task's soft label given (effective) confusions:
/// ln Dir(z | rho) + sum over the task's labels of w ln(sum_k pi_{k,l} z_k).
double task_objective(const WeightedLabels& data, int task, std::span<const ConfusionMatrix> confusions,
                      const Eigen::VectorXd& z, const Eigen::VectorXd& rho, Eigen::VectorXd* grad);

/// Likelihood part of the posterior for one voter as a function of that
/// voter's (effective) confusion matrix: sum_j w ln(sum_k conf_{k,l} Z_jk).
/// `grad`, when given, receives d/d conf (overwritten).
double voter_likelihood(const WeightedLabels& data, int voter, const ConfusionMatrix& conf, const SoftLabels& z,
                        Eigen::MatrixXd* grad);

/// sum_k (alpha_k - 1) ln x_k over rows, with gradient accumulated into `grad`.
double dirichlet_kernel(const Eigen::MatrixXd& x, const Eigen::MatrixXd& alpha, Eigen::MatrixXd* grad);

/// Maximizes task_objective for every task, starting from `z`.
SoftLabels update_soft_labels(const WeightedLabels& data, std::span<const ConfusionMatrix> confusions,
                              const SoftLabels& z, const Eigen::VectorXd& rho, const SimplexOptions& options);

/// Floored log used by every likelihood term.
inline double safe_log(double p) { return std::log(std::max(p, kProbabilityFloor)); }
inline double safe_inv(double p) { return 1.0 / std::max(p, kProbabilityFloor); }

}  // namespace detail

}  // namespace fairagg
