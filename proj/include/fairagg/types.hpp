#pragma once

// Core domain types for fair opinion aggregation.
//
// Conventions used throughout the library:
//   * voters, tasks and classes are 0-based internally; files use 1-based
//     class labels and arbitrary string ids,
//   * an unobserved label is simply absent from the LabelMatrix (there is no
//     in-memory sentinel),
//   * soft labels are J x K row-stochastic Eigen matrices, confusion matrices
//     are K x K row-stochastic Eigen matrices.

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fairagg {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// J x K matrix; row j is the class distribution of task j.
using SoftLabels = Eigen::MatrixXd;
/// K x K matrix; row k is the reported-label distribution given truth k.
using ConfusionMatrix = Eigen::MatrixXd;

inline constexpr double kRowSumTolerance = 1e-9;
inline constexpr double kProbabilityFloor = 1e-12;

// Error hierarchy. Everything the library throws derives from Error.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Index of the first row that is not a probability vector, or nullopt.
template <typename Derived>
std::optional<Eigen::Index> first_non_stochastic_row(const Eigen::MatrixBase<Derived>& m,
                                                     typename Derived::Scalar tol = kRowSumTolerance) {
    using Scalar = typename Derived::Scalar;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        if (!m.row(r).allFinite() || (m.row(r).array() < Scalar(0)).any() ||
            std::abs(m.row(r).sum() - Scalar(1)) > tol) {
            return r;
        }
    }
    return std::nullopt;
}

template <typename Derived>
bool is_row_stochastic(const Eigen::MatrixBase<Derived>& m,
                       typename Derived::Scalar tol = kRowSumTolerance) {
    return !first_non_stochastic_row(m, tol).has_value();
}

/// Throws ValidationError naming `what` and the first offending row.
void check_soft_labels(const SoftLabels& z, const std::string& what = "soft labels");
void check_confusion(const ConfusionMatrix& pi, const std::string& what = "confusion matrix");

/// One observed label. `label` is a 0-based class index.
struct Observation {
    int voter = 0;
    int task = 0;
    int label = 0;

    friend bool operator==(const Observation&, const Observation&) = default;
};

/// Sparse I x J matrix of discrete labels.
///
/// Observations are stored sorted by (task, voter), so the labels of one task
/// form a contiguous range; a second index gives per-voter access.
class LabelMatrix {
public:
    LabelMatrix() = default;

    /// Validates bounds and uniqueness of (voter, task) pairs. Empty id vectors
    /// get generated ids "v1".."vI" and "t1".."tJ".
    LabelMatrix(int num_voters, int num_tasks, int num_classes, std::vector<Observation> observations,
                std::vector<std::string> voter_ids = {}, std::vector<std::string> task_ids = {});

    int num_voters() const noexcept { return num_voters_; }
    int num_tasks() const noexcept { return num_tasks_; }
    int num_classes() const noexcept { return num_classes_; }
    std::size_t size() const noexcept { return observations_.size(); }

    std::span<const Observation> observations() const noexcept { return observations_; }

    /// Contiguous slice of observations belonging to task j.
    std::span<const Observation> task_observations(int j) const;
    /// Offset of task j's first observation in observations().
    std::size_t task_offset(int j) const { return task_offsets_.at(static_cast<std::size_t>(j)); }
    /// Positions (into observations()) of voter i's labels, ordered by task.
    std::span<const int> voter_entries(int i) const;

    int task_count(int j) const { return static_cast<int>(task_observations(j).size()); }
    int voter_count(int i) const { return static_cast<int>(voter_entries(i).size()); }

    /// Label of voter i on task j, if observed.
    std::optional<int> label(int i, int j) const;

    const std::vector<std::string>& voter_ids() const noexcept { return voter_ids_; }
    const std::vector<std::string>& task_ids() const noexcept { return task_ids_; }

    friend bool operator==(const LabelMatrix& a, const LabelMatrix& b) {
        return a.num_voters_ == b.num_voters_ && a.num_tasks_ == b.num_tasks_ &&
               a.num_classes_ == b.num_classes_ && a.observations_ == b.observations_ &&
               a.voter_ids_ == b.voter_ids_ && a.task_ids_ == b.task_ids_;
    }

private:
    int num_voters_ = 0;
    int num_tasks_ = 0;
    int num_classes_ = 2;
    std::vector<Observation> observations_;
    std::vector<std::size_t> task_offsets_;
    std::vector<int> voter_index_;
    std::vector<std::size_t> voter_offsets_;
    std::vector<std::string> voter_ids_;
    std::vector<std::string> task_ids_;
};

/// Binary voter attribute a_i plus the ideal attribute distribution p(a).
struct AttributeTable {
    std::vector<int> attributes;
    std::array<double, 2> ideal_dist{0.5, 0.5};

    AttributeTable() = default;
    /// Validates attribute values and the normalization of ideal_dist.
    AttributeTable(std::vector<int> attrs, std::array<double, 2> ideal = {0.5, 0.5});

    int size() const noexcept { return static_cast<int>(attributes.size()); }
    int operator[](int i) const { return attributes.at(static_cast<std::size_t>(i)); }
    int count(int attribute) const;
};

/// Cross-checks a label matrix against its attribute table.
void validate(const LabelMatrix& labels, const AttributeTable& attrs);

/// Dirichlet hyperparameters: alpha (K x K, one row per confusion row) and rho (K).
struct DirichletHyper {
    Eigen::MatrixXd alpha;
    Eigen::VectorXd rho;

    DirichletHyper() = default;
    DirichletHyper(Eigen::MatrixXd a, Eigen::VectorXd r);

    int num_classes() const noexcept { return static_cast<int>(rho.size()); }
    static DirichletHyper flat(int num_classes);
};

/// Label matrix plus a positive weight per observed label, aligned with
/// LabelMatrix::observations().
class WeightedLabels {
public:
    WeightedLabels() = default;
    WeightedLabels(LabelMatrix labels, Eigen::VectorXd weights);

    static WeightedLabels unit(LabelMatrix labels);

    const LabelMatrix& labels() const noexcept { return labels_; }
    const Eigen::VectorXd& weights() const noexcept { return weights_; }
    double weight(std::size_t entry) const { return weights_[static_cast<Eigen::Index>(entry)]; }

    int num_voters() const noexcept { return labels_.num_voters(); }
    int num_tasks() const noexcept { return labels_.num_tasks(); }
    int num_classes() const noexcept { return labels_.num_classes(); }

private:
    LabelMatrix labels_;
    Eigen::VectorXd weights_;
};

/// Parameters shared by the confusion-matrix models.
///
/// For D&S, `prior` is the learned class prior and `posteriors` holds q(T_j=k);
/// for Soft D&S, `prior` is unused (rho lives in the hyperparameters) and
/// `posteriors` holds the soft labels Z.
struct DsModelState {
    std::vector<ConfusionMatrix> confusions;
    Eigen::VectorXd prior;
    SoftLabels posteriors;
};

}  // namespace fairagg
