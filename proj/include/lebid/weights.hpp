#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "lebid/kernel.hpp"
#include "lebid/truncgauss.hpp"

namespace lebid {

struct WeightSolution {
    Eigen::VectorXd c;
    int iterations_run = 0;
    // Objective at the start point followed by one value per EM iteration.
    std::vector<double> objective_trace;
    bool converged = false;
};

// Roundoff allowance for EM monotonicity of the objective. The guard in
// map_em_weights adds a bound on the objective's own evaluation error, which
// only matters when K + 2 sigma2 gamma I is nearly singular.
inline constexpr double em_objective_slack = 1e-9;

// -sum_i log P(eta_i < z_i < eta_i + h | mean K_i^T c, var sigma2) + gamma c^T K c.
// The (2 pi sigma2)^(1/2) factors of the band integrals are dropped.
double neg_log_posterior(const Eigen::VectorXd& c, const Eigen::MatrixXd& K,
                         const BandConstraint& bands, double sigma2, double gamma);

// Conditional means z~_i = E[z_i | band i, mean K_i^T c, var sigma2].
Eigen::VectorXd conditional_means(const Eigen::VectorXd& predicted, const BandConstraint& bands,
                                  double sigma2);

// One MAP-EM step: c+ = (K + 2 sigma2 gamma I)^{-1} z~.
Eigen::VectorXd em_update(const Eigen::VectorXd& c, const Eigen::MatrixXd& K,
                          const BandConstraint& bands, double sigma2, double gamma);

struct EmOptions {
    int max_iter = 40;
    double tol = 1e-6;
};

// Iterates em_update from c_init (default: regularized LS on band midpoints)
// and throws NumericError if the objective ever rises beyond the slack plus
// its evaluation error.
WeightSolution map_em_weights(const Eigen::MatrixXd& K, const BandConstraint& bands,
                              double sigma2, double gamma,
                              const std::optional<Eigen::VectorXd>& c_init = std::nullopt,
                              const EmOptions& opts = {});

// c = (K + gamma_tilde I)^{-1} z.
Eigen::VectorXd regularized_ls(const Eigen::MatrixXd& K, const Eigen::VectorXd& z,
                               double gamma_tilde);

// Cholesky of K + gamma_tilde I; NumericError naming the smallest eigenvalue on failure.
Eigen::LLT<Eigen::MatrixXd> factor_regularized(const Eigen::MatrixXd& K, double gamma_tilde);

inline double em_gamma_tilde(double sigma2, double gamma) { return 2.0 * sigma2 * gamma; }

}  // namespace lebid
