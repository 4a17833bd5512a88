#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "lebid/domain.hpp"
#include "lebid/random.hpp"

namespace lebid {

// Scaled complementary error function exp(x^2) erfc(x).
double erfcx(double x);

// log P(a < Z < b), Z ~ N(mu, sigma^2). Finite for any finite a < b.
double gaussian_band_logprob(double mu, double sigma, double a, double b);

// E[Z | a < Z < b]; strictly inside (a, b).
double trunc_norm_mean(double mu, double sigma, double a, double b);

// E[Z^2 | a < Z < b].
double trunc_norm_second_moment(double mu, double sigma, double a, double b);

// One draw of Z | a < Z < b, strictly inside (a, b).
double sample_trunc_norm(double mu, double sigma, double a, double b, Rng& rng);

// Axis-aligned box lower[i] < z_i < upper[i].
struct BandConstraint {
    std::vector<double> lower;
    std::vector<double> upper;

    static BandConstraint from_bands(const BandSequence& bands);
    void validate() const;
    std::size_t size() const { return lower.size(); }
    bool strictly_inside(const Eigen::VectorXd& z) const;
};

struct GibbsOptions {
    int n_samples = 1000;
    int burn_in = 200;
    std::uint64_t seed = 0;
    // Chain start; defaults to the box midpoints (or a feasible point for
    // half-open sides).
    std::optional<Eigen::VectorXd> initial;
};

// n_samples x N draws of N(mu, Sigma) restricted to the box, systematic-scan
// Gibbs with exact univariate conditionals, thinning 1.
Eigen::MatrixXd sample_tmvn(const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma,
                            const BandConstraint& box, const GibbsOptions& opts);

struct MomentEstimate {
    Eigen::MatrixXd Q;
    int n_samples = 0;
    std::uint64_t seed = 0;
    Eigen::VectorXd last_state;
};

// Monte Carlo E[z z^T | z in box] for z ~ N(0, S).
MomentEstimate conditional_second_moment(const Eigen::MatrixXd& S, const BandConstraint& box,
                                         const GibbsOptions& opts);

}  // namespace lebid
