#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lebid/domain.hpp"

namespace lebid {

// Strictly causal SISO state-space model (D = 0).
struct StateSpace {
    Eigen::MatrixXd A;
    Eigen::VectorXd B;
    Eigen::RowVectorXd C;
    double D = 0.0;

    Eigen::Index order() const { return A.rows(); }
};

// Mass-spring-damper G(s) = 1 / (m s^2 + d s + k).
struct SecondOrderPlant {
    double m = 0.05;
    double d = 0.2;
    double k = 1.0;

    void validate() const;
};

StateSpace plant_to_ss(const SecondOrderPlant& p);

struct DiscreteStep {
    Eigen::MatrixXd Ad;
    Eigen::VectorXd Bd;
};

// Exact ZOH discretization via exp([[A, B], [0, 0]] * step).
DiscreteStep zoh_discretize(const StateSpace& ss, double step);

// x(k * grid_step) for k = 0..n_steps with zero initial state.
std::vector<double> simulate_noiseless(const StateSpace& ss, const ZohInput& u, double grid_step,
                                       int n_steps);

// g(t) = C exp(A t) B for t >= 0, and 0 for t < 0.
double true_impulse(const StateSpace& ss, double t);

}  // namespace lebid
