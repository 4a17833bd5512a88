#include "lebid/truncgauss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/special_functions/erf.hpp>

#include "lebid/errors.hpp"

namespace lebid {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();
constexpr double sqrt2 = std::numbers::sqrt2;
const double log_sqrt_2pi = 0.5 * std::log(2.0 * std::numbers::pi);

// Below this w * (1 + |x|) the band is treated as a point plus a curvature
// correction; the closed forms cancel there.
constexpr double narrow_band = 1e-3;
constexpr double robert_threshold = 5.0;

double log_phi(double x) { return -0.5 * x * x - log_sqrt_2pi; }
double phi(double x) { return std::exp(log_phi(x)); }

// Upper tail Q(x) = P(X > x).
double upper_tail(double x) { return 0.5 * std::erfc(x / sqrt2); }

// Mills ratio Q(x) / phi(x), x >= 0.
double mills(double x)
{
    if (std::isinf(x))
        return 0.0;
    return std::sqrt(std::numbers::pi / 2.0) * erfcx(x / sqrt2);
}

bool is_narrow(double lo, double hi, double w)
{
    return std::isfinite(w) && w * (1.0 + std::max(std::abs(lo), std::abs(hi))) < narrow_band;
}

// Standardized band (lo, hi), lo < hi, of a unit normal. w is the width,
// computed by the caller as (b - a) / sigma: hi - lo would lose the digits
// that lo and hi share when the band is narrow and far from the mean.

double log_mass_std(double lo, double hi, double w)
{
    if (is_narrow(lo, hi, w)) {
        const double c = 0.5 * (lo + hi);
        return std::log(w) + log_phi(c) + std::log1p(w * w * (c * c - 1.0) / 24.0);
    }
    if (lo >= 0.0) {
        const double log_q = log_phi(lo) + std::log(mills(lo));
        if (std::isinf(hi))
            return log_q;
        const double ratio = std::exp(-0.5 * w * (hi + lo)) * mills(hi) / mills(lo);
        return log_q + std::log1p(-ratio);
    }
    if (hi <= 0.0)
        return log_mass_std(-hi, -lo, w);
    return std::log1p(-(upper_tail(hi) + upper_tail(-lo)));
}

struct StdMoments {
    double mean;
    double var;
};

StdMoments moments_std(double lo, double hi, double w)
{
    if (is_narrow(lo, hi, w)) {
        const double c = 0.5 * (lo + hi);
        return {c * (1.0 - w * w / 12.0), w * w / 12.0};
    }
    if (hi <= 0.0 && lo < 0.0) {
        const auto m = moments_std(-hi, -lo, w);
        return {-m.mean, m.var};
    }
    double mean = 0.0;
    double tail_term = 0.0;  // (lo phi(lo) - hi phi(hi)) / Z
    if (lo >= 0.0) {
        // Ratios of phi(lo) * (...) so nothing underflows far in the tail.
        const double d = std::isinf(hi) ? 0.0 : std::exp(-0.5 * w * (hi + lo));
        const double den = mills(lo) - d * mills(hi);
        const double one_minus_d = std::isinf(hi) ? 1.0 : -std::expm1(-0.5 * w * (hi + lo));
        mean = one_minus_d / den;
        tail_term = (lo - (std::isinf(hi) ? 0.0 : hi * d)) / den;
    } else {
        const double z = 1.0 - (upper_tail(hi) + upper_tail(-lo));
        const double phi_lo = std::isinf(lo) ? 0.0 : phi(lo);
        const double phi_hi = std::isinf(hi) ? 0.0 : phi(hi);
        mean = (phi_lo - phi_hi) / z;
        tail_term = ((std::isinf(lo) ? 0.0 : lo * phi_lo) - (std::isinf(hi) ? 0.0 : hi * phi_hi)) / z;
    }
    mean = std::clamp(mean, lo, hi);
    double var = 1.0 + tail_term - mean * mean;
    var = std::clamp(var, 0.0, std::isfinite(w) ? std::min(1.0, 0.25 * w * w) : 1.0);
    return {mean, var};
}

void check_band(double sigma, double a, double b, const char* fn)
{
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw ValidationError(std::string(fn) + ": sigma must be positive");
    if (!(a < b) || std::isnan(a) || std::isnan(b))
        throw ValidationError(std::string(fn) + ": requires a < b");
}

double strictly_inside(double x, double a, double b)
{
    const double lo = std::nextafter(a, b);
    const double hi = std::nextafter(b, a);
    if (lo > hi)
        return 0.5 * (a + b);
    return std::clamp(x, lo, hi);
}

// Exponential-proposal rejection (Robert 1995) for lo > 0, truncated at hi.
double sample_upper_tail(double lo, double hi, Rng& rng)
{
    const double lambda = 0.5 * (lo + std::sqrt(lo * lo + 4.0));
    const double span_mass = std::isinf(hi) ? 1.0 : -std::expm1(-lambda * (hi - lo));
    for (;;) {
        const double u = uniform_open(rng);
        const double x = lo - std::log1p(-u * span_mass) / lambda;
        const double d = x - lambda;
        if (x > lo && x < hi && uniform_open(rng) <= std::exp(-0.5 * d * d))
            return x;
    }
}

double inverse_upper_tail(double q) { return sqrt2 * boost::math::erfc_inv(2.0 * q); }

double sample_std(double lo, double hi, Rng& rng)
{
    const double w = hi - lo;
    const bool straddles = lo <= 0.0 && hi >= 0.0;
    const double nearest = straddles ? 0.0 : std::min(std::abs(lo), std::abs(hi));
    if (std::isfinite(w) && w * (2.0 * nearest + w) <= 2.0) {
        // Uniform proposal; acceptance >= exp(-1).
        for (;;) {
            const double x = lo + w * uniform_open(rng);
            if (uniform_open(rng) <= std::exp(-0.5 * (x * x - nearest * nearest)))
                return x;
        }
    }
    if (lo > robert_threshold)
        return sample_upper_tail(lo, hi, rng);
    if (hi < -robert_threshold)
        return -sample_upper_tail(-hi, -lo, rng);

    // Inverse CDF, evaluated on whichever tail keeps the probability small.
    const double u = uniform_open(rng);
    const double q_lo = upper_tail(lo);
    const double q_hi = upper_tail(hi);
    const double q = q_lo - u * (q_lo - q_hi);
    if (q < 0.5)
        return q > 0.0 ? inverse_upper_tail(q) : hi;
    const double p = (1.0 - q_lo) + u * (q_lo - q_hi);
    return p > 0.0 ? -inverse_upper_tail(p) : lo;
}

}  // namespace

double erfcx(double x)
{
    if (std::isnan(x))
        return x;
    if (x < 0.0) {
        if (x < -26.7)
            return inf;
        const double hi = x * x;
        const double lo = std::fma(x, x, -hi);
        return 2.0 * std::exp(hi) * std::exp(lo) - erfcx(-x);
    }
    if (x < 26.0) {
        const double hi = x * x;
        const double lo = std::fma(x, x, -hi);
        return std::exp(hi) * std::exp(lo) * std::erfc(x);
    }
    if (std::isinf(x))
        return 0.0;
    // Asymptotic series 1/(x sqrt(pi)) sum (-1)^n (2n-1)!! / (2x^2)^n.
    const double inv2x2 = 1.0 / (2.0 * x * x);
    double term = 1.0;
    double sum = 1.0;
    for (int n = 1; n < 12; ++n) {
        term *= -(2.0 * n - 1.0) * inv2x2;
        sum += term;
    }
    return sum / (x * std::sqrt(std::numbers::pi));
}

double gaussian_band_logprob(double mu, double sigma, double a, double b)
{
    check_band(sigma, a, b, "gaussian_band_logprob");
    return log_mass_std((a - mu) / sigma, (b - mu) / sigma, (b - a) / sigma);
}

double trunc_norm_mean(double mu, double sigma, double a, double b)
{
    check_band(sigma, a, b, "trunc_norm_mean");
    const auto m = moments_std((a - mu) / sigma, (b - mu) / sigma, (b - a) / sigma);
    return strictly_inside(mu + sigma * m.mean, a, b);
}

double trunc_norm_second_moment(double mu, double sigma, double a, double b)
{
    check_band(sigma, a, b, "trunc_norm_second_moment");
    const auto m = moments_std((a - mu) / sigma, (b - mu) / sigma, (b - a) / sigma);
    const double mean = strictly_inside(mu + sigma * m.mean, a, b);
    return mean * mean + sigma * sigma * m.var;
}

double sample_trunc_norm(double mu, double sigma, double a, double b, Rng& rng)
{
    check_band(sigma, a, b, "sample_trunc_norm");
    const double lo = (a - mu) / sigma;
    const double hi = (b - mu) / sigma;
    if (std::isnan(lo) || std::isnan(hi) || lo >= 1e150 || hi <= -1e150)
        throw NumericError("band unreachable");
    for (int attempt = 0; attempt < 64; ++attempt) {
        const double z = mu + sigma * sample_std(lo, hi, rng);
        if (z > a && z < b)
            return z;
    }
    // Only reachable when the band is a few ulps wide.
    return strictly_inside(0.5 * (a + b), a, b);
}

BandConstraint BandConstraint::from_bands(const BandSequence& bands)
{
    BandConstraint box;
    box.lower.reserve(bands.size());
    box.upper.reserve(bands.size());
    for (std::size_t i = 0; i < bands.size(); ++i) {
        box.lower.push_back(bands.lower(i));
        box.upper.push_back(bands.upper(i));
    }
    return box;
}

void BandConstraint::validate() const
{
    if (lower.size() != upper.size())
        throw ValidationError("band constraint: lower/upper length mismatch");
    for (std::size_t i = 0; i < lower.size(); ++i)
        if (!(lower[i] < upper[i]))
            throw ValidationError("band constraint: lower >= upper at " + std::to_string(i));
}

bool BandConstraint::strictly_inside(const Eigen::VectorXd& z) const
{
    if (static_cast<std::size_t>(z.size()) != size())
        return false;
    for (std::size_t i = 0; i < size(); ++i)
        if (!(z(static_cast<Eigen::Index>(i)) > lower[i] && z(static_cast<Eigen::Index>(i)) < upper[i]))
            return false;
    return true;
}

Eigen::MatrixXd sample_tmvn(const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma,
                            const BandConstraint& box, const GibbsOptions& opts)
{
    box.validate();
    const Eigen::Index n = mu.size();
    if (Sigma.rows() != n || Sigma.cols() != n || static_cast<Eigen::Index>(box.size()) != n)
        throw ValidationError("sample_tmvn: dimension mismatch");
    if (opts.n_samples < 0 || opts.burn_in < 0)
        throw ValidationError("sample_tmvn: n_samples and burn_in must be >= 0");

    Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
    if (llt.info() != Eigen::Success)
        throw NumericError("covariance not PD");
    const Eigen::MatrixXd P = llt.solve(Eigen::MatrixXd::Identity(n, n));
    Eigen::VectorXd cond_sd(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(P(i, i) > 0.0))
            throw NumericError("covariance not PD");
        cond_sd(i) = 1.0 / std::sqrt(P(i, i));
    }

    Eigen::VectorXd z(n);
    if (opts.initial) {
        if (opts.initial->size() != n || !box.strictly_inside(*opts.initial))
            throw ValidationError("sample_tmvn: initial state outside the box");
        z = *opts.initial;
    } else {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double lo = box.lower[i];
            const double hi = box.upper[i];
            if (std::isfinite(lo) && std::isfinite(hi))
                z(i) = 0.5 * (lo + hi);
            else if (std::isfinite(lo))
                z(i) = std::max(lo + cond_sd(i), mu(i));
            else if (std::isfinite(hi))
                z(i) = std::min(hi - cond_sd(i), mu(i));
            else
                z(i) = mu(i);
        }
    }

    Rng rng(opts.seed);
    Eigen::VectorXd r = P * (z - mu);  // precision times deviation
    Eigen::MatrixXd samples(opts.n_samples, n);
    const int total = opts.burn_in + opts.n_samples;
    for (int sweep = 0; sweep < total; ++sweep) {
        if (sweep % 64 == 63)
            r.noalias() = P * (z - mu);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double cond_mean = z(i) - r(i) / P(i, i);
            double zi;
            try {
                zi = sample_trunc_norm(cond_mean, cond_sd(i), box.lower[i], box.upper[i], rng);
            } catch (const NumericError&) {
                throw NumericError("band unreachable at coordinate " + std::to_string(i));
            }
            const double step = zi - z(i);
            if (step != 0.0) {
                r.noalias() += step * P.col(i);
                z(i) = zi;
            }
        }
        if (sweep >= opts.burn_in)
            samples.row(sweep - opts.burn_in) = z.transpose();
    }
    return samples;
}

MomentEstimate conditional_second_moment(const Eigen::MatrixXd& S, const BandConstraint& box,
                                         const GibbsOptions& opts)
{
    if (opts.n_samples < 1)
        throw ValidationError("conditional_second_moment: n_samples must be >= 1");
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(S.rows());
    const Eigen::MatrixXd draws = sample_tmvn(zero, S, box, opts);
    MomentEstimate est;
    est.Q = (draws.transpose() * draws) / static_cast<double>(opts.n_samples);
    est.Q = 0.5 * (est.Q + est.Q.transpose()).eval();
    est.n_samples = opts.n_samples;
    est.seed = opts.seed;
    est.last_state = draws.row(draws.rows() - 1).transpose();
    return est;
}

}  // namespace lebid
