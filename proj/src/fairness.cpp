#include "fairagg/fairness.hpp"

#include <cmath>

namespace fairagg {

WeightedLabels sample_weights(const LabelMatrix& data, const AttributeTable& attrs) {
    validate(data, attrs);
    Eigen::VectorXd weights(static_cast<Eigen::Index>(data.size()));
    for (int j = 0; j < data.num_tasks(); ++j) {
        const auto obs = data.task_observations(j);
        if (obs.empty()) throw ValidationError("task '" + data.task_ids()[static_cast<std::size_t>(j)] + "' has no labels");
        std::array<double, 2> counts{0.0, 0.0};
        for (const auto& o : obs) counts[static_cast<std::size_t>(attrs[o.voter])] += 1.0;

        std::array<double, 2> p = attrs.ideal_dist;
        for (int a = 0; a < 2; ++a) {
            if (counts[static_cast<std::size_t>(a)] == 0.0) p[static_cast<std::size_t>(a)] = 0.0;
        }
        const double mass = p[0] + p[1];
        for (int a = 0; a < 2; ++a) {
            if (counts[static_cast<std::size_t>(a)] > 0.0 && !(p[static_cast<std::size_t>(a)] > 0.0)) {
                throw ValidationError("ideal distribution gives zero mass to attribute " + std::to_string(a) +
                                      " present in task '" + data.task_ids()[static_cast<std::size_t>(j)] + "'");
            }
        }
        const double total = static_cast<double>(obs.size());
        const auto offset = static_cast<Eigen::Index>(data.task_offset(j));
        for (std::size_t n = 0; n < obs.size(); ++n) {
            const auto a = static_cast<std::size_t>(attrs[obs[n].voter]);
            weights[offset + static_cast<Eigen::Index>(n)] = (p[a] / mass) * total / counts[a];
        }
    }
    return WeightedLabels(data, std::move(weights));
}

SoftLabels weighted_mv(const LabelMatrix& data, const AttributeTable& attrs) {
    return mv_aggregate(sample_weights(data, attrs));
}

AttributeSplit split_by_attribute(const LabelMatrix& data, const AttributeTable& attrs, int attribute) {
    validate(data, attrs);
    std::vector<int> voter_map(static_cast<std::size_t>(data.num_voters()), -1);
    std::vector<std::string> voter_ids;
    for (int i = 0; i < data.num_voters(); ++i) {
        if (attrs[i] != attribute) continue;
        voter_map[static_cast<std::size_t>(i)] = static_cast<int>(voter_ids.size());
        voter_ids.push_back(data.voter_ids()[static_cast<std::size_t>(i)]);
    }
    AttributeSplit split;
    std::vector<int> task_index(static_cast<std::size_t>(data.num_tasks()), -1);
    std::vector<std::string> task_ids;
    std::vector<Observation> obs;
    for (const auto& o : data.observations()) {
        const int v = voter_map[static_cast<std::size_t>(o.voter)];
        if (v < 0) continue;
        auto& t = task_index[static_cast<std::size_t>(o.task)];
        if (t < 0) {
            t = static_cast<int>(split.task_map.size());
            split.task_map.push_back(o.task);
            task_ids.push_back(data.task_ids()[static_cast<std::size_t>(o.task)]);
        }
        obs.push_back({v, t, o.label});
    }
    const auto num_voters = static_cast<int>(voter_ids.size());
    const auto num_tasks = static_cast<int>(split.task_map.size());
    split.labels = LabelMatrix(num_voters, num_tasks, data.num_classes(), std::move(obs), std::move(voter_ids),
                               std::move(task_ids));
    return split;
}

SplitResult split_aggregate(const LabelMatrix& data, const AttributeTable& attrs, const Aggregator& model) {
    validate(data, attrs);
    const int k = data.num_classes();
    std::array<SoftLabels, 2> estimates;
    std::array<std::vector<char>, 2> covered;
    for (int a = 0; a < 2; ++a) {
        auto split = split_by_attribute(data, attrs, a);
        auto& est = estimates[static_cast<std::size_t>(a)];
        auto& cov = covered[static_cast<std::size_t>(a)];
        est = SoftLabels::Zero(data.num_tasks(), k);
        cov.assign(static_cast<std::size_t>(data.num_tasks()), 0);
        if (split.task_map.empty()) continue;
        const SoftLabels sub = model(WeightedLabels::unit(std::move(split.labels)));
        if (sub.rows() != static_cast<Eigen::Index>(split.task_map.size()) || sub.cols() != k) {
            throw ValidationError("aggregation model returned soft labels of the wrong shape");
        }
        for (std::size_t t = 0; t < split.task_map.size(); ++t) {
            est.row(split.task_map[t]) = sub.row(static_cast<Eigen::Index>(t));
            cov[static_cast<std::size_t>(split.task_map[t])] = 1;
        }
    }

    SplitResult result;
    result.soft_labels = SoftLabels::Zero(data.num_tasks(), k);
    const auto& p = attrs.ideal_dist;
    for (int j = 0; j < data.num_tasks(); ++j) {
        const bool c0 = covered[0][static_cast<std::size_t>(j)] != 0;
        const bool c1 = covered[1][static_cast<std::size_t>(j)] != 0;
        const auto& id = data.task_ids()[static_cast<std::size_t>(j)];
        if (c0 && c1) {
            result.soft_labels.row(j) = p[0] * estimates[0].row(j) + p[1] * estimates[1].row(j);
        } else if (c0 || c1) {
            const int present = c0 ? 0 : 1;
            result.soft_labels.row(j) = estimates[static_cast<std::size_t>(present)].row(j);
            result.warnings.push_back({j, 1 - present,
                                       "task '" + id + "' has no labels from attribute " +
                                           std::to_string(1 - present) + "; using the attribute " +
                                           std::to_string(present) + " estimate"});
        } else {
            throw ValidationError("task '" + id + "' has no labels");
        }
    }
    return result;
}

ConfusionMatrix groupanno_combine(const ConfusionMatrix& individual, const ConfusionMatrix& group) {
    if (individual.rows() != group.rows() || individual.cols() != group.cols()) {
        throw ValidationError("confusion matrices differ in shape");
    }
    return 0.5 * (individual + group);
}

void GroupAnnoState::refresh(const AttributeTable& attrs) {
    effective.resize(individual.size());
    for (std::size_t i = 0; i < individual.size(); ++i) {
        effective[i] = groupanno_combine(individual[i], group[static_cast<std::size_t>(attrs[static_cast<int>(i)])]);
    }
}

namespace {

/// Voters of each attribute group.
std::array<std::vector<int>, 2> members(const AttributeTable& attrs) {
    std::array<std::vector<int>, 2> out;
    for (int i = 0; i < attrs.size(); ++i) out[static_cast<std::size_t>(attrs[i])].push_back(i);
    return out;
}

/// sum C .* ln((pi + P) / 2) and its gradient with respect to pi (or P).
double mixed_count_objective(const Eigen::MatrixXd& counts, const Eigen::MatrixXd& mine, const Eigen::MatrixXd& other,
                             Eigen::MatrixXd* grad) {
    double value = 0.0;
    for (Eigen::Index r = 0; r < counts.rows(); ++r) {
        for (Eigen::Index c = 0; c < counts.cols(); ++c) {
            const double n = counts(r, c);
            if (n == 0.0) continue;
            const double p = 0.5 * (mine(r, c) + other(r, c));
            value += n * detail::safe_log(p);
            if (grad) (*grad)(r, c) += 0.5 * n * detail::safe_inv(p);
        }
    }
    return value;
}

void update_individual_soft(const WeightedLabels& data, const DirichletHyper& hyper, const SoftLabels& z,
                            const AttributeTable& attrs, GroupAnnoState& state, const SimplexOptions& inner) {
    for (int i = 0; i < data.num_voters(); ++i) {
        const auto& group = state.group[static_cast<std::size_t>(attrs[i])];
        Eigen::MatrixXd mixed_grad;
        auto objective = [&](const Eigen::MatrixXd& pi, Eigen::MatrixXd* grad) {
            const Eigen::MatrixXd mixed = 0.5 * (pi + group);
            double value = detail::voter_likelihood(data, i, mixed, z, grad ? &mixed_grad : nullptr);
            if (grad) *grad = 0.5 * mixed_grad;
            value += detail::dirichlet_kernel(pi, hyper.alpha, grad);
            return value;
        };
        auto& pi = state.individual[static_cast<std::size_t>(i)];
        pi = maximize_on_simplices(objective, pi, inner).point;
    }
}

void update_group_soft(const WeightedLabels& data, const SoftLabels& z, const std::array<std::vector<int>, 2>& groups,
                       GroupAnnoState& state, const SimplexOptions& inner) {
    const int k = data.num_classes();
    for (std::size_t a = 0; a < 2; ++a) {
        if (groups[a].empty()) continue;
        Eigen::MatrixXd voter_grad;
        auto objective = [&](const Eigen::MatrixXd& group, Eigen::MatrixXd* grad) {
            if (grad) grad->setZero(k, k);
            double value = 0.0;
            for (int i : groups[a]) {
                const Eigen::MatrixXd mixed = 0.5 * (state.individual[static_cast<std::size_t>(i)] + group);
                value += detail::voter_likelihood(data, i, mixed, z, grad ? &voter_grad : nullptr);
                if (grad) *grad += 0.5 * voter_grad;
            }
            return value;
        };
        state.group[a] = maximize_on_simplices(objective, state.group[a], inner).point;
    }
}

/// Per-voter weighted counts C_i(k, l) = sum_j w_ij q_jk [X_ij = l].
std::vector<Eigen::MatrixXd> expected_counts(const WeightedLabels& data, const SoftLabels& q) {
    const int k = data.num_classes();
    std::vector<Eigen::MatrixXd> counts(static_cast<std::size_t>(data.num_voters()), Eigen::MatrixXd::Zero(k, k));
    const auto obs = data.labels().observations();
    for (std::size_t n = 0; n < obs.size(); ++n) {
        counts[static_cast<std::size_t>(obs[n].voter)].col(obs[n].label) += data.weight(n) * q.row(obs[n].task).transpose();
    }
    return counts;
}

void m_step_groupanno(const std::vector<Eigen::MatrixXd>& counts, const std::array<std::vector<int>, 2>& groups,
                      const AttributeTable& attrs, bool update_group, GroupAnnoState& state,
                      const SimplexOptions& inner) {
    const auto k = counts.empty() ? Eigen::Index{0} : counts.front().rows();
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const auto& group = state.group[static_cast<std::size_t>(attrs[static_cast<int>(i)])];
        auto objective = [&](const Eigen::MatrixXd& pi, Eigen::MatrixXd* grad) {
            if (grad) grad->setZero(k, k);
            return mixed_count_objective(counts[i], pi, group, grad);
        };
        state.individual[i] = maximize_on_simplices(objective, state.individual[i], inner).point;
    }
    if (!update_group) return;
    for (std::size_t a = 0; a < 2; ++a) {
        if (groups[a].empty()) continue;
        auto objective = [&](const Eigen::MatrixXd& group, Eigen::MatrixXd* grad) {
            if (grad) grad->setZero(k, k);
            double value = 0.0;
            for (int i : groups[a]) {
                value += mixed_count_objective(counts[static_cast<std::size_t>(i)],
                                               group, state.individual[static_cast<std::size_t>(i)], grad);
            }
            return value;
        };
        state.group[a] = maximize_on_simplices(objective, state.group[a], inner).point;
    }
}

}  // namespace

GroupAnnoResult groupanno_fit(const LabelMatrix& data, const AttributeTable& attrs, BaseModel base,
                              const DirichletHyper& hyper, GroupAnnoOutput output, const GroupAnnoOptions& options) {
    validate(data, attrs);
    const int k = data.num_classes();
    if (hyper.num_classes() != k) throw ValidationError("hyperparameters must match K");
    const auto labels = WeightedLabels::unit(data);
    const auto groups = members(attrs);

    GroupAnnoResult result;
    auto& state = result.state;
    state.individual.assign(static_cast<std::size_t>(data.num_voters()), prior_mean_confusion(hyper));
    state.group = {ConfusionMatrix::Constant(k, k, 1.0 / k), ConfusionMatrix::Constant(k, k, 1.0 / k)};
    state.refresh(attrs);
    SoftLabels z = mv_aggregate(labels);

    if (base == BaseModel::soft_dawid_skene) {
        result.prior = hyper.rho / hyper.rho.sum();
        auto posterior = [&] {
            double value = 0.0;
            for (const auto& pi : state.individual) value += detail::dirichlet_kernel(pi, hyper.alpha, nullptr);
            // the rho prior and likelihood terms are exactly the Soft D&S ones
            DsModelState effective{state.effective, result.prior, z};
            return value + log_posterior(effective, labels, DirichletHyper(Eigen::MatrixXd::Ones(k, k), hyper.rho));
        };
        double current = posterior();
        result.objective_trace.push_back(current);
        for (result.iterations = 0; result.iterations < options.max_iter;) {
            update_individual_soft(labels, hyper, z, attrs, state, options.inner);
            if (options.update_group) update_group_soft(labels, z, groups, state, options.inner);
            state.refresh(attrs);
            z = detail::update_soft_labels(labels, state.effective, z, hyper.rho, options.inner);
            const double next = posterior();
            result.objective_trace.push_back(next);
            ++result.iterations;
            const double improvement = next - current;
            current = next;
            if (improvement < options.tol * std::max(1.0, std::abs(current))) {
                result.converged = true;
                break;
            }
        }
    } else {
        auto bound = [&] {
            DsModelState effective{state.effective, result.prior, z};
            return ds_lower_bound(effective, labels);
        };
        result.prior = z.colwise().mean().transpose();
        m_step_groupanno(expected_counts(labels, z), groups, attrs, options.update_group, state, options.inner);
        state.refresh(attrs);
        result.objective_trace.push_back(bound());
        for (result.iterations = 0; result.iterations < options.max_iter;) {
            SoftLabels q = ds_e_step(state.effective, result.prior, labels);
            const double change = (q - z).cwiseAbs().maxCoeff();
            z = std::move(q);
            result.prior = z.colwise().mean().transpose();
            m_step_groupanno(expected_counts(labels, z), groups, attrs, options.update_group, state, options.inner);
            state.refresh(attrs);
            result.objective_trace.push_back(bound());
            ++result.iterations;
            if (change <= options.tol) {
                result.converged = true;
                break;
            }
        }
    }

    result.converged_soft_labels = z;
    if (output == GroupAnnoOutput::converged) {
        result.soft_labels = z;
        return result;
    }
    const auto weighted = sample_weights(data, attrs);
    std::vector<ConfusionMatrix> group_confusions;
    group_confusions.reserve(static_cast<std::size_t>(data.num_voters()));
    for (int i = 0; i < data.num_voters(); ++i) group_confusions.push_back(state.group[static_cast<std::size_t>(attrs[i])]);
    if (base == BaseModel::soft_dawid_skene) {
        result.soft_labels = detail::update_soft_labels(weighted, group_confusions, z, hyper.rho, options.inner);
    } else {
        result.soft_labels = ds_e_step(group_confusions, result.prior, weighted);
    }
    return result;
}

}  // namespace fairagg
