#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "lebid/domain.hpp"
#include "lebid/nelder_mead.hpp"
#include "lebid/truncgauss.hpp"

namespace lebid {

// Memoized K_beta for one input and grid. Nelder-Mead revisits points and
// frozen-beta searches reuse one matrix.
class GramCache {
public:
    GramCache(ZohInput u, double delta, int n, std::size_t capacity = 32);

    std::shared_ptr<const Eigen::MatrixXd> get(double beta);
    int size() const { return n_; }
    int builds() const { return builds_; }

private:
    ZohInput u_;
    double delta_;
    int n_;
    std::size_t capacity_;
    int builds_ = 0;
    std::map<double, std::shared_ptr<const Eigen::MatrixXd>> entries_;
    std::vector<double> insertion_order_;
};

// S_rho = K_beta / gamma + sigma2 I.
Eigen::MatrixXd marginal_cov(const Hyperparameters& rho, GramCache& grams);

// Second-moment matrix held as Q = R R^T so the trace term is a Frobenius norm.
struct SecondMoment {
    Eigen::MatrixXd R;

    static SecondMoment from_matrix(const Eigen::MatrixXd& Q);
    static SecondMoment from_vector(const Eigen::VectorXd& z);
    Eigen::MatrixXd matrix() const { return R * R.transpose(); }
    Eigen::Index size() const { return R.rows(); }
};

// log det S_rho + tr(S_rho^{-1} Q).
double mstep_objective(const Hyperparameters& rho, const SecondMoment& Q, GramCache& grams);

struct MstepOptions {
    int budget = 200;
    double simplex_scale = 0.2;
    // Mask over (gamma, beta, sigma2); frozen entries keep their start value.
    std::vector<bool> free{true, true, true};
};

struct MstepResult {
    Hyperparameters rho;
    double objective_start = 0.0;
    double objective_end = 0.0;
    int evals = 0;
};

// Nelder-Mead on (log gamma, log beta, log sigma2), warm-started at rho_start.
MstepResult optimize_mstep(const SecondMoment& Q, const Hyperparameters& rho_start,
                           GramCache& grams, const MstepOptions& opts = {});

enum class MomentMode { gibbs, exact_1d };

struct EbOptions {
    int em_iters = 40;
    int n_samples = 1000;
    int burn_in = 200;
    std::uint64_t seed = 0;
    MomentMode moments = MomentMode::gibbs;
    // Later iterations start the chain at the previous iteration's last draw.
    bool persistent_chain = true;
    MstepOptions mstep;
};

struct EbTrace {
    // Entry 0 is rho_init, entry j is the estimate after iteration j.
    std::vector<Hyperparameters> rho_per_iter;
    // M-step objective at the start and at the end of each iteration, same Q.
    std::vector<double> mstep_objective_start;
    std::vector<double> mstep_objective_end;
    std::vector<std::uint64_t> iteration_seeds;
    int n_samples = 0;
    int burn_in = 0;
    std::uint64_t seed = 0;
};

struct EbResult {
    Hyperparameters rho;
    EbTrace trace;
};

// Empirical-Bayes EM over rho for set-valued data: alternate Q = E[z z^T | bands, rho]
// with the M-step minimization.
EbResult eb_estimate(const Dataset& ds, const Hyperparameters& rho_init, const EbOptions& opts,
                     GramCache* grams = nullptr);

struct GaussianEbOptions {
    int max_rounds = 10;
    double round_tol = 1e-8;
    MstepOptions mstep;
};

// Closed-form marginal likelihood EB on point data z: minimizes
// log det S_rho + z^T S_rho^{-1} z, restarting Nelder-Mead from the best point
// until a round gains less than round_tol.
MstepResult gaussian_eb(const Eigen::VectorXd& z, const Hyperparameters& rho_init,
                        GramCache& grams, const GaussianEbOptions& opts = {});

// Default starting point: gamma = 1, beta = 1 / delta_u, sigma2 = h^2 / 12.
Hyperparameters default_rho_init(const ZohInput& u, double h);

}  // namespace lebid
