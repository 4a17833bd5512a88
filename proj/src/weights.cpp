#include "lebid/weights.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "lebid/errors.hpp"

namespace lebid {

namespace {

void check_dims(const Eigen::MatrixXd& K, const BandConstraint& bands, Eigen::Index n_c)
{
    if (K.rows() != K.cols())
        throw ValidationError("weights: K must be square");
    if (static_cast<Eigen::Index>(bands.size()) != K.rows() || n_c != K.rows())
        throw ValidationError("weights: dimension mismatch between K, bands and c");
}

Eigen::VectorXd box_midpoints(const BandConstraint& bands)
{
    Eigen::VectorXd mid(static_cast<Eigen::Index>(bands.size()));
    for (std::size_t i = 0; i < bands.size(); ++i)
        mid(static_cast<Eigen::Index>(i)) = 0.5 * (bands.lower[i] + bands.upper[i]);
    return mid;
}

// Bound on the floating-point error of neg_log_posterior at c. When K + gamma_tilde I
// is nearly singular, c grows large and K c loses digits to cancellation, so
// the objective can only be resolved to this accuracy.
double objective_roundoff(const Eigen::VectorXd& c, const Eigen::MatrixXd& K,
                          const BandConstraint& bands, double sigma2, double gamma)
{
    const double eps = std::numeric_limits<double>::epsilon();
    const double n = static_cast<double>(c.size());
    const Eigen::VectorXd pred = K * c;
    const Eigen::VectorXd mag = K.cwiseAbs() * c.cwiseAbs();
    double data = 0.0;
    for (Eigen::Index i = 0; i < c.size(); ++i) {
        const double e = n * eps * mag(i);
        const double w = bands.upper[i] - bands.lower[i];
        const double mid = 0.5 * (bands.lower[i] + bands.upper[i]);
        data += (std::abs(pred(i) - mid) + w + e) * e / sigma2;
    }
    return data + 2.0 * gamma * n * eps * c.cwiseAbs().dot(mag);
}

}  // namespace

double neg_log_posterior(const Eigen::VectorXd& c, const Eigen::MatrixXd& K,
                         const BandConstraint& bands, double sigma2, double gamma)
{
    check_dims(K, bands, c.size());
    const double sigma = std::sqrt(sigma2);
    const Eigen::VectorXd pred = K * c;
    double data = 0.0;
    for (Eigen::Index i = 0; i < pred.size(); ++i)
        data -= gaussian_band_logprob(pred(i), sigma, bands.lower[i], bands.upper[i]);
    return data + gamma * c.dot(pred);
}

Eigen::VectorXd conditional_means(const Eigen::VectorXd& predicted, const BandConstraint& bands,
                                  double sigma2)
{
    const double sigma = std::sqrt(sigma2);
    Eigen::VectorXd zt(predicted.size());
    for (Eigen::Index i = 0; i < predicted.size(); ++i)
        zt(i) = trunc_norm_mean(predicted(i), sigma, bands.lower[i], bands.upper[i]);
    return zt;
}

Eigen::LLT<Eigen::MatrixXd> factor_regularized(const Eigen::MatrixXd& K, double gamma_tilde)
{
    if (!(gamma_tilde > 0.0))
        throw ValidationError("regularization weight must be positive");
    Eigen::MatrixXd A = K;
    A.diagonal().array() += gamma_tilde;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
        std::ostringstream msg;
        msg << "K + gamma_tilde I not positive definite (min eigenvalue "
            << es.eigenvalues().minCoeff() << ")";
        throw NumericError(msg.str());
    }
    return llt;
}

Eigen::VectorXd regularized_ls(const Eigen::MatrixXd& K, const Eigen::VectorXd& z,
                               double gamma_tilde)
{
    if (K.rows() != K.cols() || K.rows() != z.size())
        throw ValidationError("regularized_ls: dimension mismatch");
    return factor_regularized(K, gamma_tilde).solve(z);
}

Eigen::VectorXd em_update(const Eigen::VectorXd& c, const Eigen::MatrixXd& K,
                          const BandConstraint& bands, double sigma2, double gamma)
{
    check_dims(K, bands, c.size());
    const auto llt = factor_regularized(K, em_gamma_tilde(sigma2, gamma));
    return llt.solve(conditional_means(K * c, bands, sigma2));
}

WeightSolution map_em_weights(const Eigen::MatrixXd& K, const BandConstraint& bands,
                              double sigma2, double gamma,
                              const std::optional<Eigen::VectorXd>& c_init, const EmOptions& opts)
{
    if (opts.max_iter < 1)
        throw ValidationError("map_em_weights: max_iter must be >= 1");
    if (!(sigma2 > 0.0) || !(gamma > 0.0))
        throw ValidationError("map_em_weights: sigma2 and gamma must be positive");
    bands.validate();

    // K and gamma_tilde stay fixed: one factorization serves every iteration.
    const auto llt = factor_regularized(K, em_gamma_tilde(sigma2, gamma));
    WeightSolution sol;
    sol.c = c_init ? *c_init : Eigen::VectorXd(llt.solve(box_midpoints(bands)));
    check_dims(K, bands, sol.c.size());

    double objective = neg_log_posterior(sol.c, K, bands, sigma2, gamma);
    sol.objective_trace.push_back(objective);
    for (int it = 0; it < opts.max_iter; ++it) {
        Eigen::VectorXd next = llt.solve(conditional_means(K * sol.c, bands, sigma2));
        const double next_obj = neg_log_posterior(next, K, bands, sigma2, gamma);
        const double allowance = em_objective_slack +
                                 objective_roundoff(sol.c, K, bands, sigma2, gamma) +
                                 objective_roundoff(next, K, bands, sigma2, gamma);
        if (next_obj > objective + allowance) {
            std::ostringstream msg;
            msg.precision(17);
            msg << "MAP-EM objective increased at iteration " << it + 1 << ": " << objective
                << " -> " << next_obj;
            throw NumericError(msg.str());
        }
        const double step = (next - sol.c).lpNorm<Eigen::Infinity>();
        const double scale = 1.0 + sol.c.lpNorm<Eigen::Infinity>();
        sol.c = std::move(next);
        objective = next_obj;
        sol.objective_trace.push_back(objective);
        sol.iterations_run = it + 1;
        if (step < opts.tol * scale) {
            sol.converged = true;
            break;
        }
    }
    return sol;
}

}  // namespace lebid
