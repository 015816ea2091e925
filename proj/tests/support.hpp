#pragma once

// Random instance generators shared by the test binaries.

#include "fairagg/types.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace fairagg::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

/// Random row-stochastic matrix with every entry at least `floor`.
inline Eigen::MatrixXd random_stochastic(Rng& rng, int rows, int cols, double floor = 0.0) {
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) m(r, c) = -std::log(uniform(rng, 1e-12, 1.0));
        m.row(r) /= m.row(r).sum();
        m.row(r) = (m.row(r).array() * (1.0 - cols * floor) + floor).matrix();
    }
    return m;
}

/// Random label matrix; each (i, j) is observed with probability `density`
/// and every task gets at least one label.
inline LabelMatrix random_labels(Rng& rng, int voters, int tasks, int classes, double density = 1.0) {
    std::vector<Observation> obs;
    for (int j = 0; j < tasks; ++j) {
        const int forced = uniform_int(rng, 0, voters - 1);
        for (int i = 0; i < voters; ++i) {
            if (i == forced || uniform(rng) < density) obs.push_back({i, j, uniform_int(rng, 0, classes - 1)});
        }
    }
    return LabelMatrix(voters, tasks, classes, std::move(obs));
}

/// Random attributes with both groups present (needs voters >= 2).
inline AttributeTable random_attrs(Rng& rng, int voters, std::array<double, 2> ideal = {0.5, 0.5}) {
    std::vector<int> a(static_cast<std::size_t>(voters));
    for (auto& v : a) v = uniform_int(rng, 0, 1);
    a[0] = 0;
    a[1] = 1;
    return AttributeTable(std::move(a), ideal);
}

/// Beta(a, b) draw via two gamma variates.
inline double beta(Rng& rng, double a, double b) {
    const double x = std::gamma_distribution<double>(a, 1.0)(rng);
    const double y = std::gamma_distribution<double>(b, 1.0)(rng);
    return x / (x + y);
}

/// Label matrix in which every task has labels from both attribute groups.
inline LabelMatrix covering_labels(Rng& rng, const AttributeTable& attrs, int tasks, int classes, double density) {
    const int voters = attrs.size();
    std::vector<Observation> obs;
    for (int j = 0; j < tasks; ++j) {
        for (int i = 0; i < voters; ++i) {
            // voters 0 and 1 (one per group) label every task
            if (i < 2 || uniform(rng) < density) obs.push_back({i, j, uniform_int(rng, 0, classes - 1)});
        }
    }
    return LabelMatrix(voters, tasks, classes, std::move(obs));
}

}  // namespace fairagg::testing
