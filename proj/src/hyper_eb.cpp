#include "lebid/hyper_eb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "lebid/errors.hpp"
#include "lebid/kernel.hpp"
#include "lebid/random.hpp"

namespace lebid {

GramCache::GramCache(ZohInput u, double delta, int n, std::size_t capacity)
    : u_(std::move(u)), delta_(delta), n_(n), capacity_(std::max<std::size_t>(capacity, 1))
{
    if (n < 1)
        throw ValidationError("gram cache: n must be >= 1");
    u_.validate_against(delta_);
}

std::shared_ptr<const Eigen::MatrixXd> GramCache::get(double beta)
{
    if (auto it = entries_.find(beta); it != entries_.end())
        return it->second;
    auto K = std::make_shared<const Eigen::MatrixXd>(gram_matrix(u_, delta_, beta, n_).K);
    ++builds_;
    if (entries_.size() >= capacity_) {
        entries_.erase(insertion_order_.front());
        insertion_order_.erase(insertion_order_.begin());
    }
    entries_.emplace(beta, K);
    insertion_order_.push_back(beta);
    return K;
}

Eigen::MatrixXd marginal_cov(const Hyperparameters& rho, GramCache& grams)
{
    rho.validate();
    Eigen::MatrixXd S = *grams.get(rho.beta) / rho.gamma;
    S.diagonal().array() += rho.sigma2;
    return S;
}

SecondMoment SecondMoment::from_matrix(const Eigen::MatrixXd& Q)
{
    if (Q.rows() != Q.cols() || Q.rows() == 0)
        throw ValidationError("second moment: matrix must be square and nonempty");
    const Eigen::MatrixXd Qs = 0.5 * (Q + Q.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(Qs);
    if (llt.info() == Eigen::Success)
        return {llt.matrixL()};
    // Rank-deficient: fall back to the PSD square root, clipping roundoff negatives.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Qs);
    if (es.info() != Eigen::Success)
        throw NumericError("second moment: eigen decomposition failed");
    const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return {es.eigenvectors() * root.asDiagonal()};
}

SecondMoment SecondMoment::from_vector(const Eigen::VectorXd& z)
{
    if (z.size() == 0)
        throw ValidationError("second moment: empty vector");
    return {Eigen::MatrixXd(z)};
}

double mstep_objective(const Hyperparameters& rho, const SecondMoment& Q, GramCache& grams)
{
    if (Q.size() != grams.size())
        throw ValidationError("mstep objective: dimension mismatch");
    const Eigen::MatrixXd S = marginal_cov(rho, grams);
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success)
        throw NumericError("mstep objective: S_rho not positive definite");
    const auto L = llt.matrixL();
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < S.rows(); ++i)
        logdet += std::log(llt.matrixLLT()(i, i));
    const Eigen::MatrixXd X = L.solve(Q.R);
    return 2.0 * logdet + X.squaredNorm();
}

namespace {

Eigen::Vector3d to_log(const Hyperparameters& rho)
{
    return {std::log(rho.gamma), std::log(rho.beta), std::log(rho.sigma2)};
}

Hyperparameters from_log(const Eigen::VectorXd& x)
{
    return {std::exp(x(0)), std::exp(x(1)), std::exp(x(2))};
}

}  // namespace

MstepResult optimize_mstep(const SecondMoment& Q, const Hyperparameters& rho_start,
                           GramCache& grams, const MstepOptions& opts)
{
    rho_start.validate();
    if (opts.free.size() != 3)
        throw ValidationError("mstep: free mask must have 3 entries");
    auto objective = [&](const Eigen::VectorXd& x) {
        const Hyperparameters rho = from_log(x);
        if (!rho.admissible())
            return std::numeric_limits<double>::infinity();
        try {
            return mstep_objective(rho, Q, grams);
        } catch (const NumericError&) {
            return std::numeric_limits<double>::infinity();
        }
    };
    NelderMeadOptions nm;
    nm.max_evals = opts.budget;
    nm.initial_scale = opts.simplex_scale;
    nm.free = opts.free;
    const Eigen::VectorXd x0 = to_log(rho_start);

    MstepResult out;
    out.objective_start = mstep_objective(rho_start, Q, grams);
    const auto res = nelder_mead(objective, x0, nm);
    out.evals = res.evals;
    // The first evaluation is x0 itself, so res.f <= objective_start.
    if (res.f < out.objective_start) {
        out.rho = from_log(res.x);
        out.objective_end = res.f;
    } else {
        out.rho = rho_start;
        out.objective_end = out.objective_start;
    }
    return out;
}

Hyperparameters default_rho_init(const ZohInput& u, double h)
{
    return {1.0, 1.0 / u.delta_u, h * h / 12.0};
}

EbResult eb_estimate(const Dataset& ds, const Hyperparameters& rho_init, const EbOptions& opts,
                     GramCache* grams)
{
    rho_init.validate();
    if (opts.em_iters < 1)
        throw ValidationError("eb: em_iters must be >= 1");
    ds.bands.validate();
    const int n = static_cast<int>(ds.bands.size());
    if (opts.moments == MomentMode::exact_1d && n != 1)
        throw ValidationError("eb: exact moments are only available for N = 1");

    std::optional<GramCache> own;
    if (!grams) {
        own.emplace(ds.input, ds.bands.delta, n);
        grams = &*own;
    }
    if (grams->size() != n)
        throw ValidationError("eb: gram cache size differs from dataset");

    const BandConstraint box = BandConstraint::from_bands(ds.bands);
    EbResult out;
    out.rho = rho_init;
    out.trace.rho_per_iter.push_back(rho_init);
    out.trace.n_samples = opts.n_samples;
    out.trace.burn_in = opts.burn_in;
    out.trace.seed = opts.seed;

    std::optional<Eigen::VectorXd> chain_state;
    for (int j = 0; j < opts.em_iters; ++j) {
        const Eigen::MatrixXd S = marginal_cov(out.rho, *grams);
        SecondMoment Q;
        if (opts.moments == MomentMode::exact_1d) {
            const double q = trunc_norm_second_moment(0.0, std::sqrt(S(0, 0)), box.lower[0],
                                                      box.upper[0]);
            Q.R = Eigen::MatrixXd::Constant(1, 1, std::sqrt(q));
            out.trace.iteration_seeds.push_back(0);
        } else {
            GibbsOptions g;
            g.n_samples = opts.n_samples;
            g.burn_in = opts.burn_in;
            g.seed = derive_seed(opts.seed, static_cast<std::uint64_t>(j));
            if (opts.persistent_chain)
                g.initial = chain_state;
            const MomentEstimate m = conditional_second_moment(S, box, g);
            chain_state = m.last_state;
            Q = SecondMoment::from_matrix(m.Q);
            out.trace.iteration_seeds.push_back(g.seed);
        }
        const MstepResult step = optimize_mstep(Q, out.rho, *grams, opts.mstep);
        if (!step.rho.admissible())
            throw NumericError("eb: hyperparameters left the admissible set");
        out.rho = step.rho;
        out.trace.rho_per_iter.push_back(step.rho);
        out.trace.mstep_objective_start.push_back(step.objective_start);
        out.trace.mstep_objective_end.push_back(step.objective_end);
    }
    return out;
}

MstepResult gaussian_eb(const Eigen::VectorXd& z, const Hyperparameters& rho_init,
                        GramCache& grams, const GaussianEbOptions& opts)
{
    if (opts.max_rounds < 1)
        throw ValidationError("gaussian eb: max_rounds must be >= 1");
    const SecondMoment Q = SecondMoment::from_vector(z);
    MstepResult total = optimize_mstep(Q, rho_init, grams, opts.mstep);
    for (int round = 1; round < opts.max_rounds; ++round) {
        const MstepResult next = optimize_mstep(Q, total.rho, grams, opts.mstep);
        total.evals += next.evals;
        const double gain = total.objective_end - next.objective_end;
        total.rho = next.rho;
        total.objective_end = next.objective_end;
        if (gain < opts.round_tol * (1.0 + std::abs(next.objective_end)))
            break;
    }
    return total;
}

}  // namespace lebid
