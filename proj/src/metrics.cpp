#include "fairagg/metrics.hpp"

namespace fairagg {
namespace {

void check_same_shape(const SoftLabels& a, const SoftLabels& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ValidationError("soft labels differ in shape: " + std::to_string(a.rows()) + "x" +
                              std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                              std::to_string(b.cols()));
    }
    if (a.size() == 0) throw ValidationError("soft labels are empty");
}

void check_class(const SoftLabels& a, int class_index) {
    if (class_index < 0 || class_index >= a.cols()) throw ValidationError("class index out of range");
}

}  // namespace

double mae(const SoftLabels& estimate, const SoftLabels& reference) {
    check_same_shape(estimate, reference);
    return (estimate - reference).cwiseAbs().mean();
}

double mae_class(const SoftLabels& estimate, const SoftLabels& reference, int class_index) {
    check_same_shape(estimate, reference);
    check_class(estimate, class_index);
    return (estimate.col(class_index) - reference.col(class_index)).cwiseAbs().mean();
}

double bias(const SoftLabels& estimate, const SoftLabels& reference, int class_index) {
    check_same_shape(estimate, reference);
    check_class(estimate, class_index);
    return (estimate.col(class_index) - reference.col(class_index)).mean();
}

}  // namespace fairagg
