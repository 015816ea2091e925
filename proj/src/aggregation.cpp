#include "fairagg/aggregation.hpp"

#include <cmath>
#include <limits>

namespace fairagg {
namespace {

void check_model_shapes(std::span<const ConfusionMatrix> confusions, const WeightedLabels& data) {
    const int k = data.num_classes();
    if (static_cast<int>(confusions.size()) != data.num_voters()) {
        throw ValidationError("expected one confusion matrix per voter");
    }
    for (const auto& c : confusions) {
        if (c.rows() != k || c.cols() != k) throw ValidationError("confusion matrix must be K x K");
    }
}

void check_posteriors(const SoftLabels& z, const WeightedLabels& data) {
    if (z.rows() != data.num_tasks() || z.cols() != data.num_classes()) {
        throw ValidationError("soft labels must be J x K");
    }
    check_soft_labels(z);
}

}  // namespace

SoftLabels mv_aggregate(const WeightedLabels& data) {
    const auto& labels = data.labels();
    SoftLabels z = SoftLabels::Zero(labels.num_tasks(), labels.num_classes());
    for (int j = 0; j < labels.num_tasks(); ++j) {
        const auto offset = labels.task_offset(j);
        const auto obs = labels.task_observations(j);
        if (obs.empty()) {
            throw ValidationError("task '" + labels.task_ids()[static_cast<std::size_t>(j)] + "' has no labels");
        }
        double total = 0.0;
        for (std::size_t n = 0; n < obs.size(); ++n) {
            const double w = data.weight(offset + n);
            z(j, obs[n].label) += w;
            total += w;
        }
        z.row(j) /= total;
    }
    return z;
}

SoftLabels ds_e_step(std::span<const ConfusionMatrix> confusions, const Eigen::VectorXd& prior,
                     const WeightedLabels& data) {
    check_model_shapes(confusions, data);
    const int k = data.num_classes();
    if (prior.size() != k) throw ValidationError("prior must have K entries");

    std::vector<Eigen::MatrixXd> log_conf;
    log_conf.reserve(confusions.size());
    for (const auto& c : confusions) log_conf.push_back(c.unaryExpr(&detail::safe_log));
    const Eigen::VectorXd log_prior = prior.unaryExpr(&detail::safe_log);

    const auto& labels = data.labels();
    SoftLabels q(labels.num_tasks(), k);
    Eigen::VectorXd log_q(k);
    for (int j = 0; j < labels.num_tasks(); ++j) {
        log_q = log_prior;
        const auto offset = labels.task_offset(j);
        const auto obs = labels.task_observations(j);
        for (std::size_t n = 0; n < obs.size(); ++n) {
            log_q += data.weight(offset + n) * log_conf[static_cast<std::size_t>(obs[n].voter)].col(obs[n].label);
        }
        const double peak = log_q.maxCoeff();
        if (!std::isfinite(peak)) {
            throw NumericalError("E-step produced a non-finite posterior for task " + std::to_string(j + 1));
        }
        Eigen::VectorXd unnormalized = (log_q.array() - peak).exp().matrix();
        const double total = unnormalized.sum();
        if (!(total > 0.0) || !std::isfinite(total)) {
            throw NumericalError("E-step produced an all-zero posterior for task " + std::to_string(j + 1));
        }
        q.row(j) = (unnormalized / total).transpose();
    }
    return q;
}

DsModelState ds_m_step(const SoftLabels& q, const WeightedLabels& data) {
    check_posteriors(q, data);
    const int k = data.num_classes();
    const auto& labels = data.labels();
    if (labels.num_tasks() == 0) throw ValidationError("cannot run the M-step without tasks");

    DsModelState state;
    state.prior = q.colwise().mean().transpose();
    state.posteriors = q;
    state.confusions.assign(static_cast<std::size_t>(labels.num_voters()), Eigen::MatrixXd::Zero(k, k));
    const auto obs = labels.observations();
    for (std::size_t n = 0; n < obs.size(); ++n) {
        state.confusions[static_cast<std::size_t>(obs[n].voter)].col(obs[n].label) +=
            data.weight(n) * q.row(obs[n].task).transpose();
    }
    for (auto& c : state.confusions) {
        for (int r = 0; r < k; ++r) {
            const double total = c.row(r).sum();
            if (total > 0.0) {
                c.row(r) /= total;
            } else {
                c.row(r).setConstant(1.0 / k);
            }
        }
    }
    return state;
}

double ds_lower_bound(const DsModelState& state, const WeightedLabels& data) {
    check_model_shapes(state.confusions, data);
    check_posteriors(state.posteriors, data);
    const auto& q = state.posteriors;
    const int k = data.num_classes();
    double bound = 0.0;
    for (int j = 0; j < q.rows(); ++j) {
        for (int c = 0; c < k; ++c) {
            if (q(j, c) > 0.0) bound += q(j, c) * (detail::safe_log(state.prior[c]) - std::log(q(j, c)));
        }
    }
    const auto obs = data.labels().observations();
    for (std::size_t n = 0; n < obs.size(); ++n) {
        const auto& conf = state.confusions[static_cast<std::size_t>(obs[n].voter)];
        const double w = data.weight(n);
        for (int c = 0; c < k; ++c) {
            const double qc = q(obs[n].task, c);
            if (qc > 0.0) bound += w * qc * detail::safe_log(conf(c, obs[n].label));
        }
    }
    return bound;
}

FitResult ds_fit(const WeightedLabels& data, const SoftLabels& init, const DsFitOptions& options) {
    check_posteriors(init, data);
    FitResult fit;
    fit.state = ds_m_step(init, data);
    fit.objective_trace.push_back(ds_lower_bound(fit.state, data));
    for (fit.iterations = 0; fit.iterations < options.max_iter;) {
        SoftLabels q = ds_e_step(fit.state, data);
        const double change = (q - fit.state.posteriors).cwiseAbs().maxCoeff();
        fit.state = ds_m_step(q, data);
        fit.objective_trace.push_back(ds_lower_bound(fit.state, data));
        ++fit.iterations;
        if (change <= options.tol) {
            fit.converged = true;
            break;
        }
    }
    return fit;
}

FitResult ds_fit(const WeightedLabels& data, const DsFitOptions& options) {
    return ds_fit(data, mv_aggregate(data), options);
}

namespace detail {

double dirichlet_kernel(const Eigen::MatrixXd& x, const Eigen::MatrixXd& alpha, Eigen::MatrixXd* grad) {
    double value = 0.0;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            const double a = alpha(r, c) - 1.0;
            if (a == 0.0) continue;
            value += a * safe_log(x(r, c));
            if (grad) (*grad)(r, c) += a * safe_inv(x(r, c));
        }
    }
    return value;
}

double task_objective(const WeightedLabels& data, int task, std::span<const ConfusionMatrix> confusions,
                      const Eigen::VectorXd& z, const Eigen::VectorXd& rho, Eigen::VectorXd* grad) {
    const int k = static_cast<int>(z.size());
    double value = 0.0;
    if (grad) grad->setZero(k);
    for (int c = 0; c < k; ++c) {
        const double a = rho[c] - 1.0;
        if (a == 0.0) continue;
        value += a * safe_log(z[c]);
        if (grad) (*grad)[c] += a * safe_inv(z[c]);
    }
    const auto& labels = data.labels();
    const auto offset = labels.task_offset(task);
    const auto obs = labels.task_observations(task);
    for (std::size_t n = 0; n < obs.size(); ++n) {
        const auto& conf = confusions[static_cast<std::size_t>(obs[n].voter)];
        const double w = data.weight(offset + n);
        const auto column = conf.col(obs[n].label);
        const double p = column.dot(z);
        value += w * safe_log(p);
        if (grad) *grad += (w * safe_inv(p)) * column;
    }
    return value;
}

double voter_likelihood(const WeightedLabels& data, int voter, const ConfusionMatrix& conf, const SoftLabels& z,
                        Eigen::MatrixXd* grad) {
    const int k = static_cast<int>(conf.rows());
    if (grad) grad->setZero(k, k);
    const auto& labels = data.labels();
    const auto obs = labels.observations();
    double value = 0.0;
    for (int entry : labels.voter_entries(voter)) {
        const auto& o = obs[static_cast<std::size_t>(entry)];
        const double w = data.weight(static_cast<std::size_t>(entry));
        double p = 0.0;
        for (int c = 0; c < k; ++c) p += conf(c, o.label) * z(o.task, c);
        value += w * safe_log(p);
        if (grad) {
            const double scale = w * safe_inv(p);
            for (int c = 0; c < k; ++c) (*grad)(c, o.label) += scale * z(o.task, c);
        }
    }
    return value;
}

SoftLabels update_soft_labels(const WeightedLabels& data, std::span<const ConfusionMatrix> confusions,
                              const SoftLabels& z, const Eigen::VectorXd& rho, const SimplexOptions& options) {
    SoftLabels out = z;
    for (int j = 0; j < data.num_tasks(); ++j) {
        auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
            return task_objective(data, j, confusions, x, rho, g);
        };
        const auto result = maximize_on_simplex(objective, z.row(j).transpose(), options);
        out.row(j) = result.point.transpose();
    }
    return out;
}

}  // namespace detail

ConfusionMatrix prior_mean_confusion(const DirichletHyper& hyper) {
    ConfusionMatrix mean = hyper.alpha;
    for (Eigen::Index r = 0; r < mean.rows(); ++r) mean.row(r) /= mean.row(r).sum();
    return mean;
}

double log_posterior(const DsModelState& state, const WeightedLabels& data, const DirichletHyper& hyper) {
    check_model_shapes(state.confusions, data);
    if (state.posteriors.rows() != data.num_tasks() || state.posteriors.cols() != data.num_classes()) {
        throw ValidationError("soft labels must be J x K");
    }
    if (hyper.num_classes() != data.num_classes()) throw ValidationError("hyperparameters must match K");
    double value = 0.0;
    for (const auto& conf : state.confusions) value += detail::dirichlet_kernel(conf, hyper.alpha, nullptr);
    const auto& z = state.posteriors;
    for (Eigen::Index j = 0; j < z.rows(); ++j) {
        for (Eigen::Index c = 0; c < z.cols(); ++c) value += (hyper.rho[c] - 1.0) * detail::safe_log(z(j, c));
    }
    const auto obs = data.labels().observations();
    for (std::size_t n = 0; n < obs.size(); ++n) {
        const auto& conf = state.confusions[static_cast<std::size_t>(obs[n].voter)];
        const double p = conf.col(obs[n].label).dot(z.row(obs[n].task).transpose());
        value += data.weight(n) * detail::safe_log(p);
    }
    return value;
}

PosteriorGradient log_posterior_gradient(const DsModelState& state, const WeightedLabels& data,
                                         const DirichletHyper& hyper) {
    check_model_shapes(state.confusions, data);
    const int k = data.num_classes();
    const auto& z = state.posteriors;
    PosteriorGradient g;
    g.confusions.assign(state.confusions.size(), Eigen::MatrixXd::Zero(k, k));
    g.soft_labels = Eigen::MatrixXd::Zero(z.rows(), z.cols());
    for (std::size_t i = 0; i < state.confusions.size(); ++i) {
        detail::dirichlet_kernel(state.confusions[i], hyper.alpha, &g.confusions[i]);
    }
    for (Eigen::Index j = 0; j < z.rows(); ++j) {
        for (Eigen::Index c = 0; c < k; ++c) g.soft_labels(j, c) += (hyper.rho[c] - 1.0) * detail::safe_inv(z(j, c));
    }
    const auto obs = data.labels().observations();
    for (std::size_t n = 0; n < obs.size(); ++n) {
        const auto& o = obs[n];
        const auto& conf = state.confusions[static_cast<std::size_t>(o.voter)];
        const double p = conf.col(o.label).dot(z.row(o.task).transpose());
        const double scale = data.weight(n) * detail::safe_inv(p);
        g.confusions[static_cast<std::size_t>(o.voter)].col(o.label) += scale * z.row(o.task).transpose();
        g.soft_labels.row(o.task) += scale * conf.col(o.label).transpose();
    }
    return g;
}

FitResult soft_ds_fit(const WeightedLabels& data, const DirichletHyper& hyper, const SoftDsOptions& options) {
    const int k = data.num_classes();
    if (hyper.num_classes() != k) throw ValidationError("hyperparameters must match K");

    FitResult fit;
    auto& state = fit.state;
    state.prior = hyper.rho / hyper.rho.sum();
    if (options.initial_soft_labels.size() > 0) {
        check_posteriors(options.initial_soft_labels, data);
        state.posteriors = options.initial_soft_labels;
    } else {
        state.posteriors = mv_aggregate(data);
    }
    if (!options.initial_confusions.empty()) {
        check_model_shapes(options.initial_confusions, data);
        for (const auto& c : options.initial_confusions) check_confusion(c, "initial confusion");
        state.confusions = options.initial_confusions;
    } else {
        state.confusions.assign(static_cast<std::size_t>(data.num_voters()), prior_mean_confusion(hyper));
    }

    double current = log_posterior(state, data, hyper);
    fit.objective_trace.push_back(current);
    for (fit.iterations = 0; fit.iterations < options.max_iter;) {
        if (options.update_confusions) {
            for (int i = 0; i < data.num_voters(); ++i) {
                auto objective = [&](const Eigen::MatrixXd& pi, Eigen::MatrixXd* grad) {
                    double value = detail::voter_likelihood(data, i, pi, state.posteriors, grad);
                    value += detail::dirichlet_kernel(pi, hyper.alpha, grad);
                    return value;
                };
                auto& conf = state.confusions[static_cast<std::size_t>(i)];
                conf = maximize_on_simplices(objective, conf, options.inner).point;
            }
        }
        state.posteriors = detail::update_soft_labels(data, state.confusions, state.posteriors, hyper.rho, options.inner);
        const double next = log_posterior(state, data, hyper);
        fit.objective_trace.push_back(next);
        ++fit.iterations;
        const double improvement = next - current;
        current = next;
        if (improvement < options.tol * std::max(1.0, std::abs(current))) {
            fit.converged = true;
            break;
        }
    }
    return fit;
}

}  // namespace fairagg
