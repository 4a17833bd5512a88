#include "lebid/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "lebid/errors.hpp"

namespace lebid {

namespace {

// int_a^b exp(-beta t) dt for a <= b.
double exp_integral(double a, double b, double beta)
{
    if (!(b > a))
        return 0.0;
    return std::exp(-beta * a) * (-std::expm1(-beta * (b - a))) / beta;
}

// 1 - exp(-x) (1 + x), series below 1e-2 where the closed form cancels.
double one_minus_exp_poly(double x)
{
    if (x < 1e-2) {
        double term = x * x / 2.0;  // (-1)^n (n-1) x^n / n!, n = 2
        double sum = term;
        double pow_fact = x * x / 2.0;
        for (int n = 3; n < 12; ++n) {
            pow_fact *= -x / n;
            term = (n - 1) * pow_fact;
            sum += term;
        }
        return sum;
    }
    return -std::expm1(-x) - x * std::exp(-x);
}

// int int over [a, b]^2 of exp(-beta max(x, y)).
double square_integral(double a, double b, double beta)
{
    if (!(b > a))
        return 0.0;
    const double w = b - a;
    return 2.0 * std::exp(-beta * a) * one_minus_exp_poly(beta * w) / (beta * beta);
}

void fnv_mix(std::uint64_t& h, const void* data, std::size_t len)
{
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ULL;
    }
}

}  // namespace

std::uint64_t input_hash(const ZohInput& u, double delta)
{
    std::uint64_t h = 0xCBF29CE484222325ULL;
    fnv_mix(h, &delta, sizeof delta);
    fnv_mix(h, &u.delta_u, sizeof u.delta_u);
    fnv_mix(h, u.amplitudes.data(), u.amplitudes.size() * sizeof(double));
    return h;
}

double ss1_kernel(double t, double tau, double beta)
{
    return std::exp(-beta * std::max(t, tau));
}

double ss1_rectangle_integral(double x0, double x1, double y0, double y1, double beta)
{
    if (!(x1 > x0) || !(y1 > y0))
        return 0.0;
    if (x1 <= y0)  // x < y throughout
        return (x1 - x0) * exp_integral(y0, y1, beta);
    if (y1 <= x0)
        return (y1 - y0) * exp_integral(x0, x1, beta);
    // Split both sides at the overlap [a, b]; every piece but the square is ordered.
    const double a = std::max(x0, y0);
    const double b = std::min(x1, y1);
    const double xs[4] = {x0, a, b, x1};
    const double ys[4] = {y0, a, b, y1};
    double total = square_integral(a, b, beta);
    for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q) {
            if (p == 1 && q == 1)
                continue;
            total += ss1_rectangle_integral(xs[p], xs[p + 1], ys[q], ys[q + 1], beta);
        }
    return total;
}

KernelGram gram_matrix(const ZohInput& u, double delta, double beta, int n)
{
    if (n < 1)
        throw ValidationError("gram_matrix: N must be >= 1");
    if (!(beta > 0.0))
        throw ValidationError("gram_matrix: beta must be positive");
    u.validate_against(delta);

    // On the delta grid every u(i*delta - xi) is constant per cell
    // [p*delta, (p+1)*delta], so K = U F U^T with F the exact cell integrals.
    // F_pq = delta * E_max(p,q) off the diagonal and D_p on it.
    const int hold = u.hold_cells(delta);
    const std::vector<double> ucell = u.cell_values(delta, n);
    Eigen::VectorXd e(n), d(n);
    for (int p = 0; p < n; ++p) {
        e(p) = exp_integral(p * delta, (p + 1) * delta, beta);
        d(p) = square_integral(p * delta, (p + 1) * delta, beta);
    }

    // W = F U^T, one column per output index j.
    Eigen::MatrixXd W(n, n);
    Eigen::VectorXd v(n);
    for (int j = 0; j < n; ++j) {
        for (int p = 0; p < n; ++p)
            v(p) = p <= j ? ucell[j - p] : 0.0;  // row j+1 of U
        double above = 0.0;  // sum_{q > p} E_q v_q
        for (int p = n - 1; p >= 0; --p) {
            W(p, j) = d(p) * v(p) + delta * above;
            above += e(p) * v(p);
        }
        double below = 0.0;  // sum_{q < p} v_q
        for (int p = 0; p < n; ++p) {
            W(p, j) += delta * e(p) * below;
            below += v(p);
        }
    }

    // K = U W using prefix sums over hold segments of each row of U.
    Eigen::MatrixXd prefix = Eigen::MatrixXd::Zero(n + 1, n);
    for (int p = 0; p < n; ++p)
        prefix.row(p + 1) = prefix.row(p) + W.row(p);

    KernelGram g;
    g.beta = beta;
    g.input_id = input_hash(u, delta);
    g.K = Eigen::MatrixXd::Zero(n, n);
    const int n_seg = static_cast<int>(u.amplitudes.size());
    for (int i = 1; i <= n; ++i) {
        // Row i: U_ip = ucell[i-1-p]; segment s covers cells k in [s*hold, (s+1)*hold).
        for (int s = 0; s < n_seg; ++s) {
            const int k_lo = s * hold;
            if (k_lo > i - 1)
                break;
            const int k_hi = std::min((s + 1) * hold - 1, i - 1);
            const int p_lo = i - 1 - k_hi;
            const int p_hi = i - 1 - k_lo;
            const double a = u.amplitudes[s];
            if (a == 0.0)
                continue;
            g.K.row(i - 1) += a * (prefix.row(p_hi + 1) - prefix.row(p_lo));
        }
    }
    g.K = 0.5 * (g.K + g.K.transpose()).eval();
    if (!g.K.allFinite())
        throw NumericError("gram_matrix: non-finite entries (input amplitudes too large)");
    return g;
}

double representer_eval(const ZohInput& u, double delta, int i, double beta, double t)
{
    if (t < 0.0)
        throw ValidationError("representer_eval: t must be >= 0");
    const double ti = i * delta;
    const double decay = std::exp(-beta * t);
    double total = 0.0;
    for (std::size_t s = 0; s < u.amplitudes.size(); ++s) {
        const double a = u.amplitudes[s];
        if (a == 0.0)
            continue;
        // u(ti - tau) = a for tau in (ti - (s+1) du, ti - s du], clipped to [0, ti].
        const double lo = std::max(0.0, ti - (s + 1) * u.delta_u);
        const double hi = ti - s * u.delta_u;
        if (!(hi > lo))
            break;
        const double below = std::max(0.0, std::min(hi, t) - lo);
        total += a * (decay * below + exp_integral(std::max(lo, t), hi, beta));
    }
    return total;
}

std::vector<double> reconstruct_impulse(const Eigen::VectorXd& c, const ZohInput& u, double delta,
                                        double beta, std::span<const double> t_grid)
{
    std::vector<double> out;
    out.reserve(t_grid.size());
    for (double t : t_grid) {
        double g = 0.0;
        for (Eigen::Index i = 0; i < c.size(); ++i)
            if (c(i) != 0.0)
                g += c(i) * representer_eval(u, delta, static_cast<int>(i + 1), beta, t);
        out.push_back(g);
    }
    return out;
}

Eigen::VectorXd predict_output(const KernelGram& gram, const Eigen::VectorXd& c)
{
    if (c.size() != gram.size())
        throw ValidationError("predict_output: weight vector length differs from K");
    return gram.K * c;
}

}  // namespace lebid
