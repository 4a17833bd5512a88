#include "lebid/nelder_mead.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <mutex>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include "lebid/errors.hpp"

namespace lebid {

namespace {

struct Problem {
    const std::function<double(const Eigen::VectorXd&)>* f;
    const Eigen::VectorXd* x0;
    std::vector<Eigen::Index> active;
    int max_evals;
    NelderMeadResult best;

    Eigen::VectorXd embed(const gsl_vector* y) const
    {
        Eigen::VectorXd x = *x0;
        for (std::size_t k = 0; k < active.size(); ++k)
            x(active[k]) = gsl_vector_get(y, k);
        return x;
    }

    double eval(const Eigen::VectorXd& x)
    {
        // Past the budget every point looks infinitely bad and f is not called.
        if (best.evals >= max_evals)
            return std::numeric_limits<double>::max();
        double v = (*f)(x);
        if (!std::isfinite(v))
            v = std::numeric_limits<double>::infinity();
        ++best.evals;
        if (best.evals == 1 || v < best.f) {
            best.f = v;
            best.x = x;
        }
        // The simplex code rejects non-finite values.
        return std::isfinite(v) ? v : std::numeric_limits<double>::max();
    }
};

double gsl_objective(const gsl_vector* y, void* params)
{
    auto* p = static_cast<Problem*>(params);
    return p->eval(p->embed(y));
}

struct MinimizerDeleter {
    void operator()(gsl_multimin_fminimizer* m) const { gsl_multimin_fminimizer_free(m); }
};
struct VectorDeleter {
    void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};

}  // namespace

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, const NelderMeadOptions& opts)
{
    const Eigen::Index full_dim = x0.size();
    if (!opts.free.empty() && static_cast<Eigen::Index>(opts.free.size()) != full_dim)
        throw ValidationError("nelder_mead: free mask has wrong length");
    if (opts.max_evals < 1)
        throw ValidationError("nelder_mead: max_evals must be >= 1");
    static std::once_flag quiet;
    std::call_once(quiet, [] { gsl_set_error_handler_off(); });

    Problem p{&f, &x0, {}, opts.max_evals, {x0, 0.0, 0}};
    for (Eigen::Index k = 0; k < full_dim; ++k)
        if (opts.free.empty() || opts.free[static_cast<std::size_t>(k)])
            p.active.push_back(k);
    const std::size_t n = p.active.size();
    if (n == 0) {
        p.eval(x0);
        return p.best;
    }

    std::unique_ptr<gsl_vector, VectorDeleter> y(gsl_vector_alloc(n));
    std::unique_ptr<gsl_vector, VectorDeleter> step(gsl_vector_alloc(n));
    for (std::size_t k = 0; k < n; ++k)
        gsl_vector_set(y.get(), k, x0(p.active[k]));
    gsl_vector_set_all(step.get(), opts.initial_scale);

    std::unique_ptr<gsl_multimin_fminimizer, MinimizerDeleter> nm(
        gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n));
    if (!nm)
        throw NumericError("nelder_mead: allocation failed");
    gsl_multimin_function fn{&gsl_objective, n, &p};
    if (gsl_multimin_fminimizer_set(nm.get(), &fn, y.get(), step.get()) != GSL_SUCCESS)
        return p.best;
    while (p.best.evals < opts.max_evals) {
        if (gsl_multimin_fminimizer_iterate(nm.get()) != GSL_SUCCESS)
            break;
        if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(nm.get()), opts.x_tol) ==
            GSL_SUCCESS)
            break;
    }
    return p.best;
}

}  // namespace lebid
