#include "lebid/lti_sim.hpp"

#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

#include "lebid/errors.hpp"

namespace lebid {

void SecondOrderPlant::validate() const
{
    // d = 0 is the undamped oscillator: marginally stable but realizable.
    if (!(m > 0.0 && d >= 0.0 && k > 0.0) || !std::isfinite(m) || !std::isfinite(d) ||
        !std::isfinite(k))
        throw ValidationError("plant: m, k must be positive and d non-negative");
}

StateSpace plant_to_ss(const SecondOrderPlant& p)
{
    p.validate();
    // Controllable canonical form of 1/(m s^2 + d s + k).
    StateSpace ss;
    ss.A.resize(2, 2);
    ss.A << 0.0, 1.0, -p.k / p.m, -p.d / p.m;
    ss.B.resize(2);
    ss.B << 0.0, 1.0 / p.m;
    ss.C.resize(2);
    ss.C << 1.0, 0.0;
    return ss;
}

DiscreteStep zoh_discretize(const StateSpace& ss, double step)
{
    if (!(step >= 0.0))
        throw ValidationError("zoh_discretize: step must be >= 0");
    const Eigen::Index n = ss.order();
    Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + 1, n + 1);
    aug.topLeftCorner(n, n) = ss.A * step;
    aug.topRightCorner(n, 1) = ss.B * step;
    const Eigen::MatrixXd e = aug.exp();
    return {e.topLeftCorner(n, n), e.topRightCorner(n, 1)};
}

std::vector<double> simulate_noiseless(const StateSpace& ss, const ZohInput& u, double grid_step,
                                       int n_steps)
{
    if (!(grid_step > 0.0))
        throw ValidationError("simulate_noiseless: grid_step must be positive");
    if (n_steps < 0)
        throw ValidationError("simulate_noiseless: n_steps must be >= 0");
    u.validate();
    if (!on_grid(u.delta_u, grid_step))
        throw ValidationError("simulate_noiseless: grid_step does not divide delta_u");

    const int per_hold = static_cast<int>(std::lround(u.delta_u / grid_step));
    const auto step = zoh_discretize(ss, grid_step);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(ss.order());
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n_steps) + 1);
    out.push_back(ss.C.dot(x));
    for (int k = 0; k < n_steps; ++k) {
        const auto seg = static_cast<std::size_t>(k / per_hold);
        const double uk = seg < u.amplitudes.size() ? u.amplitudes[seg] : 0.0;
        x = step.Ad * x + step.Bd * uk;
        out.push_back(ss.C.dot(x));
    }
    return out;
}

double true_impulse(const StateSpace& ss, double t)
{
    if (t < 0.0)
        return 0.0;
    const Eigen::MatrixXd e = (ss.A * t).exp();
    return ss.C.dot(e * ss.B);
}

}  // namespace lebid
