#pragma once

// Maximization of a smooth objective over a product of probability simplices.
//
// A point is a matrix whose rows each lie on the simplex; a single simplex is
// the one-row case. The solver is projected-gradient ascent with Armijo
// backtracking along the projection arc, so every iterate is feasible and the
// objective never decreases.

#include "fairagg/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace fairagg {

/// Euclidean projection of `v` onto {x : x >= 0, sum x = 1}.
template <typename Derived>
Vector<typename Derived::Scalar> project_simplex(const Eigen::MatrixBase<Derived>& v) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = v.size();
    if (n == 0) throw DomainError("cannot project an empty vector onto the simplex");
    if (!v.allFinite()) throw DomainError("cannot project a non-finite vector onto the simplex");

    Vector<Scalar> sorted = v.reshaped();
    std::sort(sorted.data(), sorted.data() + n, std::greater<Scalar>());
    Scalar cumulative(0);
    Scalar theta(0);
    for (Eigen::Index k = 0; k < n; ++k) {
        cumulative += sorted[k];
        const Scalar candidate = (cumulative - Scalar(1)) / Scalar(k + 1);
        if (sorted[k] - candidate > Scalar(0)) theta = candidate;
    }
    Vector<Scalar> out = (v.reshaped().array() - theta).cwiseMax(Scalar(0)).matrix();
    // absorb rounding so the result sums to 1 to machine precision
    const Scalar total = out.sum();
    if (total > Scalar(0)) out /= total;
    return out;
}

/// Row-wise projection of `m` onto a product of simplices.
template <typename Derived>
Matrix<typename Derived::Scalar> project_rows_to_simplex(const Eigen::MatrixBase<Derived>& m) {
    Matrix<typename Derived::Scalar> out(m.rows(), m.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r) out.row(r) = project_simplex(m.row(r).transpose()).transpose();
    return out;
}

struct SimplexOptions {
    /// Projected-gradient norm at which the solve stops.
    double tol = 1e-6;
    int max_iter = 200;
    double initial_step = 1.0;
    double shrink = 0.5;
    double armijo = 1e-4;
    /// Relative objective change below which an accepted step ends the solve,
    /// as in L-BFGS-B's factr test; 0 disables it.
    double ftol = 1e-12;
    /// Start each line search at min(initial_step, 2 * last accepted step)
    /// instead of initial_step.
    bool warm_step = true;
    /// Backtracking stops once the move is below this in every coordinate.
    double min_move = 1e-15;
};

enum class SimplexStatus {
    converged,       ///< projected-gradient norm <= tol
    max_iterations,  ///< iteration budget exhausted
    boundary_stall,  ///< no ascent step at machine precision
    stalled_ftol,    ///< relative objective change below ftol
};

struct SimplexResult {
    Eigen::MatrixXd point;
    double value = 0.0;
    int iterations = 0;
    SimplexStatus status = SimplexStatus::max_iterations;
};

/// Infinity norm of P(x + g) - x, the projected-gradient (gradient-mapping)
/// norm used as the stationarity measure.
inline double projected_gradient_norm(const Eigen::MatrixXd& x, const Eigen::MatrixXd& grad) {
    return (project_rows_to_simplex(x + grad) - x).cwiseAbs().maxCoeff();
}

/// Maximizes `objective` over row-stochastic matrices of the shape of `start`.
///
/// `objective(x, grad)` returns f(x) and, when `grad` is non-null, writes the
/// gradient into it. The start must be feasible.
template <typename Objective>
SimplexResult maximize_on_simplices(Objective&& objective, Eigen::MatrixXd start, const SimplexOptions& options = {}) {
    if (auto row = first_non_stochastic_row(start)) {
        throw ValidationError("start point row " + std::to_string(*row + 1) + " is not on the simplex");
    }
    SimplexResult result;
    result.point = std::move(start);
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(result.point.rows(), result.point.cols());
    result.value = objective(std::as_const(result.point), &grad);
    if (!std::isfinite(result.value) || !grad.allFinite()) {
        throw DomainError("objective or gradient is not finite at the start point");
    }

    Eigen::MatrixXd candidate;
    Eigen::MatrixXd step;
    double last_step = options.initial_step;
    for (result.iterations = 0; result.iterations < options.max_iter; ++result.iterations) {
        if (projected_gradient_norm(result.point, grad) <= options.tol) {
            result.status = SimplexStatus::converged;
            return result;
        }
        double t = options.warm_step ? std::min(options.initial_step, 2.0 * last_step) : options.initial_step;
        bool accepted = false;
        double candidate_value = 0.0;
        for (;;) {
            candidate = project_rows_to_simplex(result.point + t * grad);
            step = candidate - result.point;
            if (step.cwiseAbs().maxCoeff() < options.min_move) break;
            candidate_value = objective(std::as_const(candidate), nullptr);
            if (std::isfinite(candidate_value) &&
                candidate_value >= result.value + options.armijo * grad.cwiseProduct(step).sum()) {
                accepted = true;
                break;
            }
            t *= options.shrink;
        }
        if (!accepted || candidate_value < result.value) {
            result.status = SimplexStatus::boundary_stall;
            return result;
        }
        last_step = t;
        const double previous = result.value;
        result.point.swap(candidate);
        result.value = objective(std::as_const(result.point), &grad);
        if (!grad.allFinite()) throw NumericalError("objective gradient became non-finite");
        if (result.value - previous <=
            options.ftol * std::max({std::abs(previous), std::abs(result.value), 1.0})) {
            ++result.iterations;
            result.status = SimplexStatus::stalled_ftol;
            return result;
        }
    }
    result.status = projected_gradient_norm(result.point, grad) <= options.tol ? SimplexStatus::converged
                                                                                : SimplexStatus::max_iterations;
    return result;
}

/// Single-simplex convenience wrapper: `objective(z, grad)` with z a column vector.
template <typename Objective>
SimplexResult maximize_on_simplex(Objective&& objective, const Eigen::VectorXd& start,
                                  const SimplexOptions& options = {}) {
    Eigen::VectorXd z(start.size());
    Eigen::VectorXd g(start.size());
    auto as_rows = [&](const Eigen::MatrixXd& x, Eigen::MatrixXd* grad) {
        z = x.row(0).transpose();
        const double value = objective(std::as_const(z), grad ? &g : nullptr);
        if (grad) *grad = g.transpose();
        return value;
    };
    auto result = maximize_on_simplices(as_rows, Eigen::MatrixXd(start.transpose()), options);
    result.point.transposeInPlace();
    return result;
}

}  // namespace fairagg
