#pragma once

#include "fairagg/types.hpp"

namespace fairagg {

/// Mean of |estimate - reference| over all J*K entries.
double mae(const SoftLabels& estimate, const SoftLabels& reference);

/// Mean of |estimate - reference| over tasks for one 0-based class.
double mae_class(const SoftLabels& estimate, const SoftLabels& reference, int class_index);

/// Mean signed difference (estimate - reference) on one 0-based class;
/// zero means the estimate is not skewed toward or away from that class.
double bias(const SoftLabels& estimate, const SoftLabels& reference, int class_index);

}  // namespace fairagg
