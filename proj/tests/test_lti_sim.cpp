#include <doctest.h>

#include <cmath>
#include <complex>

#include <unsupported/Eigen/Polynomials>

#include "lebid/errors.hpp"
#include "lebid/lti_sim.hpp"
#include "oracles.hpp"

using namespace lebid;

namespace {

StateSpace integrator()
{
    StateSpace ss;
    ss.A = Eigen::MatrixXd::Zero(1, 1);
    ss.B = Eigen::VectorXd::Ones(1);
    ss.C = Eigen::RowVectorXd::Ones(1);
    return ss;
}

// C (sI - A)^{-1} B at a complex s.
std::complex<double> transfer(const StateSpace& ss, std::complex<double> s)
{
    const Eigen::Index n = ss.order();
    Eigen::MatrixXcd M = s * Eigen::MatrixXcd::Identity(n, n) - ss.A.cast<std::complex<double>>();
    Eigen::VectorXcd x = M.partialPivLu().solve(ss.B.cast<std::complex<double>>());
    return (ss.C.cast<std::complex<double>>() * x)(0);
}

}  // namespace

TEST_CASE("undamped oscillator has eigenvalues +-i")
{
    const StateSpace ss = plant_to_ss({1.0, 0.0, 1.0});
    const Eigen::VectorXcd ev = ss.A.eigenvalues();
    CHECK(std::abs(ev(0).real()) < 1e-12);
    CHECK(std::abs(std::abs(ev(0).imag()) - 1.0) < 1e-12);
    CHECK(std::abs(ev(0) + ev(1)) < 1e-12);
}

TEST_CASE("non-positive mass or stiffness and negative damping are rejected")
{
    CHECK_THROWS_AS(plant_to_ss({1.0, -0.1, 1.0}), ValidationError);
    CHECK_THROWS_AS(plant_to_ss({0.0, 1.0, 1.0}), ValidationError);
    CHECK_THROWS_AS(plant_to_ss({-1.0, 1.0, 1.0}), ValidationError);
    CHECK_THROWS_AS(plant_to_ss({1.0, 1.0, 0.0}), ValidationError);
}

TEST_CASE("case-study plant poles are the roots of 0.05 s^2 + 0.2 s + 1")
{
    const StateSpace ss = plant_to_ss({0.05, 0.2, 1.0});
    Eigen::PolynomialSolver<double, 2> solver;
    solver.compute(Eigen::Vector3d(1.0, 0.2, 0.05));
    const auto roots = solver.roots();
    const Eigen::VectorXcd ev = ss.A.eigenvalues();
    for (Eigen::Index k = 0; k < 2; ++k) {
        double best = 1e9;
        for (Eigen::Index r = 0; r < 2; ++r)
            best = std::min(best, std::abs(ev(k) - roots(r)));
        CHECK(best < 1e-10);
    }
    CHECK(ss.A.eigenvalues().real().maxCoeff() < 0.0);
    CHECK(ss.D == 0.0);
}

TEST_CASE("realization matches the transfer function and its DC gain")
{
    const SecondOrderPlant p{0.05, 0.2, 1.0};
    const StateSpace ss = plant_to_ss(p);
    for (std::complex<double> s : {std::complex<double>(0.3, 1.1), std::complex<double>(-1.0, 2.5),
                                   std::complex<double>(5.0, 0.0)}) {
        const auto expected = 1.0 / (p.m * s * s + p.d * s + p.k);
        CHECK(std::abs(transfer(ss, s) - expected) < 1e-12 * std::abs(expected));
    }
    const double dc = (ss.C * (-ss.A).inverse() * ss.B)(0);
    CHECK(dc == doctest::Approx(1.0 / p.k).epsilon(1e-14));
    const StateSpace ss2 = plant_to_ss({2.0, 3.0, 4.0});
    CHECK((ss2.C * (-ss2.A).inverse() * ss2.B)(0) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("zero step discretizes to identity and zero")
{
    const StateSpace ss = plant_to_ss({0.05, 0.2, 1.0});
    const DiscreteStep d = zoh_discretize(ss, 0.0);
    CHECK((d.Ad - Eigen::MatrixXd::Identity(2, 2)).norm() == 0.0);
    CHECK(d.Bd.norm() == 0.0);
    CHECK_THROWS_AS(zoh_discretize(ss, -1.0), ValidationError);
}

TEST_CASE("integrator discretizes to Ad = 1, Bd = step")
{
    for (double step : {0.1, 1.0, 7.5}) {
        const DiscreteStep d = zoh_discretize(integrator(), step);
        CHECK(d.Ad(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(d.Bd(0) == doctest::Approx(step).epsilon(1e-14));
    }
}

TEST_CASE("case-study plant discretization matches a Taylor-series exponential")
{
    const StateSpace ss = plant_to_ss({0.05, 0.2, 1.0});
    const double step = 0.1;
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(3, 3);
    M.topLeftCorner(2, 2) = ss.A * step;
    M.topRightCorner(2, 1) = ss.B * step;
    const Eigen::MatrixXd E = oracle::expm_taylor(M, 30);
    const DiscreteStep d = zoh_discretize(ss, step);
    CHECK((d.Ad - E.topLeftCorner(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((d.Bd - E.topRightCorner(2, 1)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("two steps of s equal one step of 2s")
{
    const StateSpace ss = plant_to_ss({0.05, 0.2, 1.0});
    for (double s : {0.005, 0.1, 0.7}) {
        const DiscreteStep one = zoh_discretize(ss, s);
        const DiscreteStep two = zoh_discretize(ss, 2 * s);
        CHECK((one.Ad * one.Ad - two.Ad).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((one.Ad * one.Bd + one.Bd - two.Bd).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("zero input gives zero output")
{
    const StateSpace ss = plant_to_ss({0.05, 0.2, 1.0});
    ZohInput u{3.0, {0.0, 0.0, 0.0}, 0.0};
    for (double x : simulate_noiseless(ss, u, 0.1, 90))
        CHECK(x == 0.0);
}

TEST_CASE("unit step into an integrator is a ramp")
{
    ZohInput u{1.0, std::vector<double>(5, 1.0), 0.0};
    const auto x = simulate_noiseless(integrator(), u, 0.25, 20);
    REQUIRE(x.size() == 21);
    for (std::size_t k = 0; k < x.size(); ++k)
        CHECK(x[k] == doctest::Approx(0.25 * static_cast<double>(k)).epsilon(1e-13));
}

TEST_CASE("grid step must divide the hold period")
{
    ZohInput u{3.0, {1.0}, 0.0};
    CHECK_THROWS_AS(simulate_noiseless(integrator(), u, 0.7, 10), ValidationError);
}

TEST_CASE("case-study plant step response settles at 1/k")
{
    const StateSpace ss = plant_to_ss({0.05, 0.2, 1.0});
    ZohInput u{1.0, std::vector<double>(30, 1.0), 0.0};
    const auto x = simulate_noiseless(ss, u, 0.1, 300);
    CHECK(x.back() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("simulation is unchanged by subdividing the grid")
{
    const StateSpace ss = plant_to_ss({0.05, 0.2, 1.0});
    ZohInput u{3.0, {0.4, -1.3, 2.2, 0.1, -0.7}, 0.0};
    const auto coarse = simulate_noiseless(ss, u, 0.1, 150);
    const auto fine = simulate_noiseless(ss, u, 0.005, 3000);
    for (std::size_t k = 0; k < coarse.size(); ++k)
        CHECK(std::abs(coarse[k] - fine[20 * k]) < 1e-10);
}

TEST_CASE("impulse response basics")
{
    const StateSpace ss = plant_to_ss({0.05, 0.2, 1.0});
    CHECK(true_impulse(ss, 0.0) == doctest::Approx((ss.C * ss.B)(0)));
    CHECK(true_impulse(ss, -1.0) == 0.0);
    CHECK(true_impulse(integrator(), 0.0) == 1.0);
    CHECK(true_impulse(integrator(), 12.5) == doctest::Approx(1.0));
}

TEST_CASE("impulse response matches a narrow-pulse simulation")
{
    // A pulse of area 1 and width w gives (1/w) int_{t-w}^{t} g; the midpoint
    // rule error is O(w^2) and Richardson extrapolation removes it.
    const StateSpace ss = plant_to_ss({0.05, 0.2, 1.0});
    auto pulse_response = [&](double w) {
        ZohInput u{w, {1.0 / w}, 0.0};
        const int steps = static_cast<int>(std::lround((1.0 + w / 2) / (w / 2)));
        const auto x = simulate_noiseless(ss, u, w / 2, steps);
        return x.back();
    };
    const double r1 = pulse_response(1e-3);
    const double r2 = pulse_response(5e-4);
    const double extrapolated = (4.0 * r2 - r1) / 3.0;
    CHECK(std::abs(extrapolated - true_impulse(ss, 1.0)) < 1e-6);
}

TEST_CASE("stable impulse response decays")
{
    const StateSpace ss = plant_to_ss({0.05, 0.2, 1.0});
    const double slowest = 1.0 / 2.0;  // real part of the poles is -2
    double peak = 0.0;
    for (int k = 0; k <= 1000; ++k)
        peak = std::max(peak, std::abs(true_impulse(ss, 0.005 * k)));
    CHECK(std::abs(true_impulse(ss, 10.0 * slowest)) < 1e-3 * peak);
}
