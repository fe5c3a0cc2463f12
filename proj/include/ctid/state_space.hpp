#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ctid/polynomial.hpp"

namespace ctid {

/// Exact zero-order-hold maps x_{k+1} = transition x_k + input u_k.
struct DiscreteMaps {
  Eigen::MatrixXd transition;
  Eigen::VectorXd input;
};

/// Controllable canonical realization of 1/D(p) in the scaled state
/// x_j = p^j w, d(p) w = u with d = D / leading(D).
/// Row n-1 holds -d_0 .. -d_{n-1}; input enters the last state.
Eigen::MatrixXd companion_dynamics(const Polynomial& denominator);

/// Van Loan augmented-matrix exponential for a single-input system.
DiscreteMaps zoh_maps(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double sample_period);

/// det(xI - M), descending coefficients, leading 1. Uses a Hessenberg
/// reduction followed by the standard determinant recurrence.
std::vector<double> characteristic_polynomial(const Eigen::MatrixXd& m);

}  // namespace ctid
