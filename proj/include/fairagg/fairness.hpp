#pragma once

// Fairness options composable with the aggregation models: sample weighting,
// data splitting and GroupAnno.

#include "fairagg/aggregation.hpp"
#include "fairagg/types.hpp"

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace fairagg {

/// w_ij = p_j(a_i) * N_j / N_j^(a_i), where p_j is the ideal distribution
/// renormalized over the attributes present in task j. Per task the weights
/// sum to N_j; a task labelled by one attribute group gets unit weights.
WeightedLabels sample_weights(const LabelMatrix& data, const AttributeTable& attrs);

/// Majority voting with sample weights.
SoftLabels weighted_mv(const LabelMatrix& data, const AttributeTable& attrs);

/// Any aggregation procedure mapping weighted labels to soft labels.
using Aggregator = std::function<SoftLabels(const WeightedLabels&)>;

struct SplitWarning {
    int task = 0;
    /// Attribute group that gave no label for the task.
    int missing_attribute = 0;
    std::string message;
};

struct SplitResult {
    SoftLabels soft_labels;
    std::vector<SplitWarning> warnings;
};

/// Labels of voters with attribute `attribute` restricted to the tasks they
/// cover; `task_map[t]` gives the original index of sub-task t.
struct AttributeSplit {
    LabelMatrix labels;
    std::vector<int> task_map;
};
AttributeSplit split_by_attribute(const LabelMatrix& data, const AttributeTable& attrs, int attribute);

/// Runs `model` on each attribute group's labels and mixes the two estimates
/// with the ideal distribution. A task missing from one split takes the other
/// split's estimate and produces a warning.
SplitResult split_aggregate(const LabelMatrix& data, const AttributeTable& attrs, const Aggregator& model);

/// Entrywise average (individual + group) / 2.
ConfusionMatrix groupanno_combine(const ConfusionMatrix& individual, const ConfusionMatrix& group);

struct GroupAnnoState {
    std::vector<ConfusionMatrix> individual;
    std::array<ConfusionMatrix, 2> group;
    std::vector<ConfusionMatrix> effective;

    /// Recomputes `effective` from `individual`, `group` and the attributes.
    void refresh(const AttributeTable& attrs);
};

enum class BaseModel { dawid_skene, soft_dawid_skene };

enum class GroupAnnoOutput {
    /// Converged q (D&S) or Z (Soft D&S).
    converged = 1,
    /// One extra q/Z maximization with voter i's confusion set to P^(a_i) and
    /// sample-weighted labels, started from the converged value.
    group_confusion_reweighted = 2,
};

struct GroupAnnoOptions {
    /// Max |delta q| for D&S, relative log-posterior improvement for Soft D&S.
    double tol = 1e-6;
    int max_iter = 100;
    /// When false, P^(0) and P^(1) stay at their initial (uniform) value.
    bool update_group = true;
    SimplexOptions inner;
};

struct GroupAnnoResult {
    GroupAnnoState state;
    /// Output selected by GroupAnnoOutput.
    SoftLabels soft_labels;
    /// Converged q or Z, regardless of the output option.
    SoftLabels converged_soft_labels;
    /// Learned class prior (D&S) or rho normalized (Soft D&S).
    Eigen::VectorXd prior;
    std::vector<double> objective_trace;
    int iterations = 0;
    bool converged = false;
};

/// Fits D&S or Soft D&S with every voter's confusion replaced by
/// (pi^(i) + P^(a_i)) / 2. Rounds update all pi^(i), then P^(0), P^(1), then
/// the soft labels (E-step for D&S). P starts uniform and pi^(i) at the mean
/// of the alpha prior; alpha acts as a prior on pi^(i) only for Soft D&S.
GroupAnnoResult groupanno_fit(const LabelMatrix& data, const AttributeTable& attrs, BaseModel base,
                              const DirichletHyper& hyper, GroupAnnoOutput output,
                              const GroupAnnoOptions& options = {});

}  // namespace fairagg
