#include "fairagg/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fairagg {

void check_soft_labels(const SoftLabels& z, const std::string& what) {
    if (auto row = first_non_stochastic_row(z)) {
        throw ValidationError(what + ": row " + std::to_string(*row + 1) +
                              " is not a probability vector");
    }
}

void check_confusion(const ConfusionMatrix& pi, const std::string& what) {
    if (pi.rows() != pi.cols()) {
        throw ValidationError(what + ": confusion matrix must be square");
    }
    if (auto row = first_non_stochastic_row(pi)) {
        throw ValidationError(what + ": row " + std::to_string(*row + 1) + " is not row-stochastic");
    }
}

LabelMatrix::LabelMatrix(int num_voters, int num_tasks, int num_classes,
                         std::vector<Observation> observations, std::vector<std::string> voter_ids,
                         std::vector<std::string> task_ids)
    : num_voters_(num_voters),
      num_tasks_(num_tasks),
      num_classes_(num_classes),
      observations_(std::move(observations)),
      voter_ids_(std::move(voter_ids)),
      task_ids_(std::move(task_ids)) {
    if (num_voters < 0 || num_tasks < 0) {
        throw ValidationError("label matrix dimensions must be non-negative");
    }
    if (num_classes < 2) {
        throw ValidationError("number of classes must be at least 2");
    }
    for (std::size_t n = 0; n < observations_.size(); ++n) {
        const auto& o = observations_[n];
        if (o.voter < 0 || o.voter >= num_voters || o.task < 0 || o.task >= num_tasks) {
            throw ValidationError("observation " + std::to_string(n + 1) + " has an index out of range");
        }
        if (o.label < 0 || o.label >= num_classes) {
            throw ValidationError("observation " + std::to_string(n + 1) + " has label " +
                                  std::to_string(o.label + 1) + " outside 1.." + std::to_string(num_classes));
        }
    }
    std::sort(observations_.begin(), observations_.end(), [](const Observation& a, const Observation& b) {
        return a.task != b.task ? a.task < b.task : a.voter < b.voter;
    });
    for (std::size_t n = 1; n < observations_.size(); ++n) {
        const auto& a = observations_[n - 1];
        const auto& b = observations_[n];
        if (a.task == b.task && a.voter == b.voter) {
            throw ValidationError("duplicate label for voter " + std::to_string(a.voter + 1) + ", task " +
                                  std::to_string(a.task + 1));
        }
    }

    if (voter_ids_.empty()) {
        voter_ids_.reserve(static_cast<std::size_t>(num_voters));
        for (int i = 0; i < num_voters; ++i) voter_ids_.push_back("v" + std::to_string(i + 1));
    }
    if (task_ids_.empty()) {
        task_ids_.reserve(static_cast<std::size_t>(num_tasks));
        for (int j = 0; j < num_tasks; ++j) task_ids_.push_back("t" + std::to_string(j + 1));
    }
    if (voter_ids_.size() != static_cast<std::size_t>(num_voters) ||
        task_ids_.size() != static_cast<std::size_t>(num_tasks)) {
        throw ValidationError("id map size does not match matrix dimensions");
    }

    task_offsets_.assign(static_cast<std::size_t>(num_tasks) + 1, 0);
    std::vector<std::size_t> voter_counts(static_cast<std::size_t>(num_voters), 0);
    for (const auto& o : observations_) {
        ++task_offsets_[static_cast<std::size_t>(o.task) + 1];
        ++voter_counts[static_cast<std::size_t>(o.voter)];
    }
    std::partial_sum(task_offsets_.begin(), task_offsets_.end(), task_offsets_.begin());

    voter_offsets_.assign(static_cast<std::size_t>(num_voters) + 1, 0);
    for (int i = 0; i < num_voters; ++i) {
        voter_offsets_[static_cast<std::size_t>(i) + 1] =
            voter_offsets_[static_cast<std::size_t>(i)] + voter_counts[static_cast<std::size_t>(i)];
    }
    voter_index_.resize(observations_.size());
    std::vector<std::size_t> cursor(voter_offsets_.begin(), voter_offsets_.end() - 1);
    // observations are task-major, so each voter's entries end up task-ordered
    for (std::size_t n = 0; n < observations_.size(); ++n) {
        auto& c = cursor[static_cast<std::size_t>(observations_[n].voter)];
        voter_index_[c++] = static_cast<int>(n);
    }
}

std::span<const Observation> LabelMatrix::task_observations(int j) const {
    const auto b = task_offsets_.at(static_cast<std::size_t>(j));
    const auto e = task_offsets_.at(static_cast<std::size_t>(j) + 1);
    return std::span<const Observation>(observations_).subspan(b, e - b);
}

std::span<const int> LabelMatrix::voter_entries(int i) const {
    const auto b = voter_offsets_.at(static_cast<std::size_t>(i));
    const auto e = voter_offsets_.at(static_cast<std::size_t>(i) + 1);
    return std::span<const int>(voter_index_).subspan(b, e - b);
}

std::optional<int> LabelMatrix::label(int i, int j) const {
    const auto obs = task_observations(j);
    auto it = std::lower_bound(obs.begin(), obs.end(), i,
                               [](const Observation& o, int voter) { return o.voter < voter; });
    if (it != obs.end() && it->voter == i) return it->label;
    return std::nullopt;
}

AttributeTable::AttributeTable(std::vector<int> attrs, std::array<double, 2> ideal)
    : attributes(std::move(attrs)), ideal_dist(ideal) {
    for (std::size_t i = 0; i < attributes.size(); ++i) {
        if (attributes[i] != 0 && attributes[i] != 1) {
            throw ValidationError("attribute of voter " + std::to_string(i + 1) + " is not 0 or 1");
        }
    }
    if (!(ideal_dist[0] >= 0.0) || !(ideal_dist[1] >= 0.0)) {
        throw ValidationError("ideal attribute distribution must be non-negative");
    }
    if (std::abs(ideal_dist[0] + ideal_dist[1] - 1.0) > 1e-12) {
        throw ValidationError("ideal attribute distribution must sum to 1");
    }
}

int AttributeTable::count(int attribute) const {
    return static_cast<int>(std::count(attributes.begin(), attributes.end(), attribute));
}

void validate(const LabelMatrix& labels, const AttributeTable& attrs) {
    if (attrs.size() != labels.num_voters()) {
        throw ValidationError("attribute table has " + std::to_string(attrs.size()) + " voters, label matrix has " +
                              std::to_string(labels.num_voters()));
    }
    // AttributeTable is validated on construction but its fields are public.
    for (int i = 0; i < attrs.size(); ++i) {
        if (attrs[i] != 0 && attrs[i] != 1) {
            throw ValidationError("attribute of voter " + std::to_string(i + 1) + " is not 0 or 1");
        }
    }
    const auto& p = attrs.ideal_dist;
    if (!(p[0] >= 0.0) || !(p[1] >= 0.0) || std::abs(p[0] + p[1] - 1.0) > 1e-12) {
        throw ValidationError("ideal attribute distribution must be non-negative and sum to 1");
    }
}

DirichletHyper::DirichletHyper(Eigen::MatrixXd a, Eigen::VectorXd r) : alpha(std::move(a)), rho(std::move(r)) {
    if (alpha.rows() != alpha.cols() || alpha.rows() != rho.size() || rho.size() < 2) {
        throw ValidationError("alpha must be K x K and rho length K (K >= 2)");
    }
    if (!alpha.allFinite() || !rho.allFinite() || (alpha.array() <= 0.0).any() || (rho.array() <= 0.0).any()) {
        throw ValidationError("Dirichlet hyperparameters must be finite and strictly positive");
    }
}

DirichletHyper DirichletHyper::flat(int num_classes) {
    return DirichletHyper(Eigen::MatrixXd::Ones(num_classes, num_classes), Eigen::VectorXd::Ones(num_classes));
}

WeightedLabels::WeightedLabels(LabelMatrix labels, Eigen::VectorXd weights)
    : labels_(std::move(labels)), weights_(std::move(weights)) {
    if (static_cast<std::size_t>(weights_.size()) != labels_.size()) {
        throw ValidationError("weight vector size does not match the number of observed labels");
    }
    for (Eigen::Index n = 0; n < weights_.size(); ++n) {
        if (!(weights_[n] > 0.0) || !std::isfinite(weights_[n])) {
            throw ValidationError("weight of observation " + std::to_string(n + 1) + " is not positive");
        }
    }
}

WeightedLabels WeightedLabels::unit(LabelMatrix labels) {
    const auto n = static_cast<Eigen::Index>(labels.size());
    return WeightedLabels(std::move(labels), Eigen::VectorXd::Ones(n));
}

}  // namespace fairagg
