#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lebid/domain.hpp"

namespace lebid {

// Output kernel matrix K_ij = int int u(i*delta - xi) u(j*delta - tau) k(xi, tau)
// for the first-order stable-spline kernel, i, j = 1..N.
struct KernelGram {
    Eigen::MatrixXd K;
    double beta = 0.0;
    std::uint64_t input_id = 0;

    Eigen::Index size() const { return K.rows(); }
};

std::uint64_t input_hash(const ZohInput& u, double delta);

// k(t, tau) = exp(-beta * max(t, tau)).
double ss1_kernel(double t, double tau, double beta);

// Closed-form integral of exp(-beta * max(x, y)) over [x0, x1] x [y0, y1].
double ss1_rectangle_integral(double x0, double x1, double y0, double y1, double beta);

KernelGram gram_matrix(const ZohInput& u, double delta, double beta, int n);

// Representer g_i(t) = int_0^inf u(i*delta - tau) k(t, tau) dtau, i is 1-based.
double representer_eval(const ZohInput& u, double delta, int i, double beta, double t);

// g(t) = sum_i c_i g_i(t) on each grid point.
std::vector<double> reconstruct_impulse(const Eigen::VectorXd& c, const ZohInput& u, double delta,
                                        double beta, std::span<const double> t_grid);

// (g * u)(i*delta) = K_i^T c.
Eigen::VectorXd predict_output(const KernelGram& gram, const Eigen::VectorXd& c);

}  // namespace lebid
