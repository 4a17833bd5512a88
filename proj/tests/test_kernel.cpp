#include <doctest.h>

#include <cmath>
#include <random>

#include "lebid/errors.hpp"
#include "lebid/kernel.hpp"
#include "lebid/lti_sim.hpp"
#include "oracles.hpp"

using namespace lebid;

namespace {

ZohInput random_input(std::mt19937_64& rng, double delta, int max_cells_per_hold, int n_holds)
{
    std::uniform_int_distribution<int> cells(1, max_cells_per_hold);
    std::normal_distribution<double> amp;
    ZohInput u;
    u.delta_u = cells(rng) * delta;
    for (int k = 0; k < n_holds; ++k)
        u.amplitudes.push_back(amp(rng));
    return u;
}

double rel_err(double a, double b)
{
    return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

}  // namespace

TEST_CASE("ss1 kernel values")
{
    CHECK(ss1_kernel(0.0, 0.0, 3.0) == 1.0);
    CHECK(ss1_kernel(1.0, 2.0, 1.0) == doctest::Approx(std::exp(-2.0)));
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> U(0.0, 10.0);
    for (int k = 0; k < 100; ++k) {
        const double a = U(rng), b = U(rng), beta = 0.1 + U(rng);
        CHECK(ss1_kernel(a, b, beta) == ss1_kernel(b, a, beta));
    }
}

TEST_CASE("rectangle integral matches quadrature")
{
    const oracle::GaussLegendre gl(30);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> U(0.0, 3.0);
    for (int k = 0; k < 40; ++k) {
        double x0 = U(rng), x1 = x0 + U(rng), y0 = U(rng), y1 = y0 + U(rng);
        const double beta = 0.2 + U(rng);
        const double ref = gl.integrate_split(
            [&](double x) {
                return gl.integrate_split(
                    [&](double y) { return std::exp(-beta * std::max(x, y)); }, y0, y1, {x});
            },
            x0, x1, {y0, y1});
        CHECK(rel_err(ss1_rectangle_integral(x0, x1, y0, y1, beta), ref) < 1e-12);
    }
}

TEST_CASE("zero input gives a zero gram matrix")
{
    ZohInput u{0.3, {0.0, 0.0, 0.0}, 0.0};
    const auto g = gram_matrix(u, 0.1, 1.0, 12);
    CHECK(g.K.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("unit step, N=2, beta=1, delta=1 matches quadrature")
{
    ZohInput u{1.0, {1.0, 1.0}, 0.0};
    const auto g = gram_matrix(u, 1.0, 1.0, 2);
    for (int i = 1; i <= 2; ++i)
        for (int j = 1; j <= 2; ++j)
            CHECK(rel_err(g.K(i - 1, j - 1), oracle::gram_entry(u, 1.0, 1.0, i, j, 64)) < 1e-9);
}

TEST_CASE("case-study input setup: spot checks against quadrature")
{
    std::mt19937_64 rng(3);
    ZohInput u;
    u.delta_u = 3.0;
    std::normal_distribution<double> amp;
    for (int k = 0; k < 10; ++k)
        u.amplitudes.push_back(amp(rng));
    const auto g = gram_matrix(u, 0.1, 0.5, 300);
    std::uniform_int_distribution<int> idx(1, 300);
    for (int k = 0; k < 8; ++k) {
        const int i = idx(rng), j = idx(rng);
        CHECK(rel_err(g.K(i - 1, j - 1), oracle::gram_entry(u, 0.1, 0.5, i, j)) < 1e-8);
    }
}

TEST_CASE("gram matrix is symmetric and PSD")
{
    std::mt19937_64 rng(4);
    for (int rep = 0; rep < 5; ++rep) {
        const ZohInput u = random_input(rng, 0.1, 12, 8);
        const auto g = gram_matrix(u, 0.1, 0.3 + rep, 60);
        CHECK((g.K - g.K.transpose()).cwiseAbs().maxCoeff() == 0.0);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.K);
        const double norm2 = es.eigenvalues().cwiseAbs().maxCoeff();
        CHECK(es.eigenvalues().minCoeff() >= -1e-8 * norm2);
        CHECK(g.beta == 0.3 + rep);
        CHECK(g.input_id == input_hash(u, 0.1));
    }
}

TEST_CASE("gram matrix is quadratic in the input amplitude")
{
    std::mt19937_64 rng(5);
    ZohInput u = random_input(rng, 0.1, 5, 10);
    const auto g1 = gram_matrix(u, 0.1, 1.3, 40);
    for (double& a : u.amplitudes)
        a *= -2.5;
    const auto g2 = gram_matrix(u, 0.1, 1.3, 40);
    CHECK((g2.K - 6.25 * g1.K).cwiseAbs().maxCoeff() < 1e-12 * g2.K.cwiseAbs().maxCoeff());
}

TEST_CASE("input hash separates inputs")
{
    ZohInput u{0.3, {1.0, 2.0}, 0.0};
    ZohInput v = u;
    v.amplitudes[1] = 2.0000000001;
    CHECK(input_hash(u, 0.1) == input_hash(u, 0.1));
    CHECK(input_hash(u, 0.1) != input_hash(v, 0.1));
    CHECK(input_hash(u, 0.1) != input_hash(u, 0.05));
}

TEST_CASE("representers: zero input and quadrature agreement")
{
    ZohInput zero{0.5, {0.0, 0.0}, 0.0};
    for (double t : {0.0, 0.3, 2.0})
        CHECK(representer_eval(zero, 0.1, 7, 1.0, t) == 0.0);

    std::mt19937_64 rng(6);
    const ZohInput u = random_input(rng, 0.1, 7, 12);
    std::uniform_real_distribution<double> T(0.0, 8.0);
    std::uniform_int_distribution<int> I(1, 60);
    for (int k = 0; k < 10; ++k) {
        const double t = T(rng);
        const int i = I(rng);
        const double ref = oracle::representer(u, 0.1, 0.8, i, t);
        CHECK(std::abs(representer_eval(u, 0.1, i, 0.8, t) - ref) <= 1e-9 * std::max(1.0, std::abs(ref)));
    }
}

TEST_CASE("convolving representer i with u at j*delta reproduces K_ij")
{
    std::mt19937_64 rng(7);
    const ZohInput u = random_input(rng, 0.25, 4, 6);
    const double delta = 0.25, beta = 0.9;
    const int n = 12;
    const auto g = gram_matrix(u, delta, beta, n);
    const oracle::GaussLegendre gl(24);
    for (int i = 1; i <= n; i += 3) {
        for (int j = 1; j <= n; j += 2) {
            const double tj = j * delta;
            auto cuts = oracle::input_cuts(u, tj);
            // g_i has kinks at the hold edges of u(i delta - .).
            for (double c : oracle::input_cuts(u, i * delta))
                cuts.push_back(c);
            cuts.push_back(i * delta);
            const double conv = gl.integrate_split(
                [&](double xi) { return u.value(tj - xi) * representer_eval(u, delta, i, beta, xi); },
                0.0, tj, cuts);
            CHECK(std::abs(conv - g.K(i - 1, j - 1)) <= 1e-8 * std::max(1.0, std::abs(conv)));
        }
    }
}

TEST_CASE("reconstruction is linear in c")
{
    std::mt19937_64 rng(8);
    const ZohInput u = random_input(rng, 0.1, 10, 5);
    const int n = 30;
    std::vector<double> t;
    for (int k = 0; k <= 50; ++k)
        t.push_back(0.1 * k);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
    for (double v : reconstruct_impulse(zero, u, 0.1, 1.0, t))
        CHECK(v == 0.0);

    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e(4) = 1.0;
    const auto ge = reconstruct_impulse(e, u, 0.1, 1.0, t);
    for (std::size_t k = 0; k < t.size(); ++k)
        CHECK(ge[k] == doctest::Approx(representer_eval(u, 0.1, 5, 1.0, t[k])).epsilon(1e-14));

    const Eigen::VectorXd c1 = Eigen::VectorXd::Random(n), c2 = Eigen::VectorXd::Random(n);
    const auto a = reconstruct_impulse(c1, u, 0.1, 1.0, t);
    const auto b = reconstruct_impulse(c2, u, 0.1, 1.0, t);
    const auto s = reconstruct_impulse(c1 + c2, u, 0.1, 1.0, t);
    for (std::size_t k = 0; k < t.size(); ++k)
        CHECK(std::abs(s[k] - a[k] - b[k]) < 1e-12);
}

TEST_CASE("predict_output")
{
    KernelGram g;
    g.K = Eigen::MatrixXd::Identity(4, 4);
    const Eigen::VectorXd c = Eigen::VectorXd::LinSpaced(4, -1.0, 2.0);
    CHECK((predict_output(g, c) - c).norm() == 0.0);
    CHECK(predict_output(g, Eigen::VectorXd::Zero(4)).norm() == 0.0);
    CHECK_THROWS_AS(predict_output(g, Eigen::VectorXd::Zero(3)), ValidationError);
}

TEST_CASE("K c equals the fine-grid convolution of the reconstructed impulse with u")
{
    std::mt19937_64 rng(9);
    const double delta = 0.1;
    const ZohInput u = random_input(rng, delta, 10, 6);
    const int n = 40, sub = 100;
    const auto g = gram_matrix(u, delta, 1.2, n);
    const Eigen::VectorXd c = Eigen::VectorXd::Random(n);
    const Eigen::VectorXd pred = predict_output(g, c);
    const double step = delta / sub;
    std::vector<double> t;
    for (int k = 0; k <= n * sub; ++k)
        t.push_back((k + 0.5) * step);  // midpoints
    const auto gh = reconstruct_impulse(c, u, delta, 1.2, t);
    for (int i = 1; i <= n; i += 3) {
        double conv = 0.0;
        for (int k = 0; k < i * sub; ++k)
            conv += gh[k] * u.value(i * delta - t[k]) * step;
        CHECK(std::abs(conv - pred(i - 1)) <= 1e-3 * std::max(1.0, std::abs(pred(i - 1))));
    }
}

TEST_CASE("representer Gram reproduces K: the RKHS norm of the expansion is c^T K c")
{
    // <g_i, g_j>_H = K_ij; checked through the kernel-integral identity
    // int int u(i delta - xi) k(xi, tau) u(j delta - tau) = K_ij evaluated by
    // integrating representer j against u(i delta - .).
    std::mt19937_64 rng(10);
    const ZohInput u = random_input(rng, 0.2, 3, 5);
    const int n = 6;
    const auto g = gram_matrix(u, 0.2, 0.7, n);
    const oracle::GaussLegendre gl(24);
    Eigen::MatrixXd M(n, n);
    for (int i = 1; i <= n; ++i)
        for (int j = 1; j <= n; ++j) {
            auto cuts = oracle::input_cuts(u, i * 0.2);
            for (double c : oracle::input_cuts(u, j * 0.2))
                cuts.push_back(c);
            cuts.push_back(j * 0.2);
            M(i - 1, j - 1) = gl.integrate_split(
                [&](double xi) {
                    return u.value(i * 0.2 - xi) * representer_eval(u, 0.2, j, 0.7, xi);
                },
                0.0, i * 0.2, cuts);
        }
    CHECK((M - g.K).cwiseAbs().maxCoeff() < 1e-10);
    const Eigen::VectorXd c = Eigen::VectorXd::Random(n);
    CHECK(c.dot(M * c) == doctest::Approx(c.dot(g.K * c)).epsilon(1e-10));
}
