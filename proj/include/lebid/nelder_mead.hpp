#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace lebid {

struct NelderMeadOptions {
    int max_evals = 200;
    double initial_scale = 0.2;
    // Stop early once the simplex size falls below this.
    double x_tol = 1e-8;
    // Coordinates with free[k] == false stay at x0[k]. Empty means all free.
    std::vector<bool> free;
};

struct NelderMeadResult {
    Eigen::VectorXd x;
    double f = 0.0;
    int evals = 0;
};

// Minimizes f with the GSL nmsimplex2 method from a right-angled initial
// simplex at x0. The result is the best point evaluated, so f(result) <= f(x0)
// always, and f is called at most max_evals times. Non-finite objective values
// are treated as +inf.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, const NelderMeadOptions& opts = {});

}  // namespace lebid
