#include "lebid/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include "lebid/errors.hpp"
#include "lebid/json_io.hpp"
#include "lebid/kernel.hpp"
#include "lebid/lebesgue.hpp"
#include "lebid/random.hpp"
#include "lebid/truncgauss.hpp"

namespace lebid {

double fit_metric(std::span<const double> x_hat, std::span<const double> x)
{
    if (x_hat.size() != x.size())
        throw ValidationError("fit: length mismatch");
    if (x.size() < 2)
        throw ValidationError("fit: need at least 2 samples");
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        num += (x_hat[i] - x[i]) * (x_hat[i] - x[i]);
        den += (x[i] - mean) * (x[i] - mean);
    }
    if (!(den > 0.0))
        throw ValidationError("fit: reference signal is constant");
    return 100.0 * (1.0 - std::sqrt(num) / std::sqrt(den));
}

std::vector<double> ImpulseEstimate::impulse(std::span<const double> t_grid) const
{
    return reconstruct_impulse(c, input, delta, rho.beta, t_grid);
}

namespace {

Hyperparameters start_point(const Dataset& ds, const EstimatorConfig& cfg)
{
    return cfg.rho_init ? *cfg.rho_init : default_rho_init(ds.input, ds.bands.h);
}

ImpulseEstimate make_estimate(std::string name, const Dataset& ds, const Hyperparameters& rho,
                              Eigen::VectorXd c, const Eigen::MatrixXd& K)
{
    if (!c.allFinite())
        throw NumericError(name + ": non-finite kernel weights");
    ImpulseEstimate est;
    est.estimator = std::move(name);
    est.rho = rho;
    est.predicted = K * c;
    est.c = std::move(c);
    est.input = ds.input;
    est.delta = ds.bands.delta;
    return est;
}

}  // namespace

LebesgueEstimate estimate_lebesgue(const Dataset& ds, const EstimatorConfig& cfg)
{
    ds.validate();
    const int n = static_cast<int>(ds.size());
    GramCache grams(ds.input, ds.bands.delta, n);
    const EbResult eb = eb_estimate(ds, start_point(ds, cfg), cfg.eb, &grams);
    const auto K = grams.get(eb.rho.beta);
    const BandConstraint box = BandConstraint::from_bands(ds.bands);
    WeightSolution w = map_em_weights(*K, box, eb.rho.sigma2, eb.rho.gamma, std::nullopt, cfg.em);
    LebesgueEstimate out{make_estimate("leb", ds, eb.rho, w.c, *K), eb.trace, std::move(w)};
    return out;
}

ImpulseEstimate estimate_baseline(const Dataset& ds, const EstimatorConfig& cfg,
                                  BaselineSource source)
{
    ds.validate();
    std::vector<double> data;
    if (source == BaselineSource::oracle) {
        if (!ds.oracle_z)
            throw ValidationError("oracle estimator requires oracle_z in the dataset");
        data = *ds.oracle_z;
    } else {
        data = midpoint_data(ds.bands);
    }
    const Eigen::VectorXd z = Eigen::Map<const Eigen::VectorXd>(
        data.data(), static_cast<Eigen::Index>(data.size()));
    const int n = static_cast<int>(ds.size());
    GramCache grams(ds.input, ds.bands.delta, n);
    const MstepResult eb = gaussian_eb(z, start_point(ds, cfg), grams, cfg.gaussian);
    const auto K = grams.get(eb.rho.beta);
    Eigen::VectorXd c = regularized_ls(*K, z, em_gamma_tilde(eb.rho.sigma2, eb.rho.gamma));
    return make_estimate(source == BaselineSource::oracle ? "or" : "rie", ds, eb.rho,
                         std::move(c), *K);
}

void ExperimentConfig::validate() const
{
    plant.validate();
    sampling.validate();
    if (!(total_time > 0.0) || !on_grid(total_time, sampling.delta) ||
        std::lround(total_time / sampling.delta) < 2)
        throw ValidationError("config: total_time must be a multiple (>= 2) of delta");
    if (!(delta_u > 0.0) || !on_grid(delta_u, sampling.delta))
        throw ValidationError("config: delta_u must be a positive multiple of delta");
    if (!(noise_std >= 0.0) || !std::isfinite(noise_std))
        throw ValidationError("config: noise_std must be >= 0");
    if (!(input_std > 0.0) || !std::isfinite(input_std))
        throw ValidationError("config: input_std must be > 0");
    if (n_runs < 0)
        throw ValidationError("config: n_runs must be >= 0");
    if (em_iters < 1 || q_samples < 1 || q_burn_in < 0 || mstep_budget < 1)
        throw ValidationError("config: em_iters, q_samples, mstep_budget must be >= 1");
    if (n_threads < 1)
        throw ValidationError("config: n_threads must be >= 1");
    if (!(impulse_horizon > 0.0) || !(impulse_step > 0.0))
        throw ValidationError("config: impulse grid must be positive");
    std::set<std::string> seen;
    for (const auto& e : estimators) {
        if (std::find(known_estimators.begin(), known_estimators.end(), e) ==
            known_estimators.end())
            throw ValidationError("config: unknown estimator '" + e + "'");
        if (!seen.insert(e).second)
            throw ValidationError("config: duplicate estimator '" + e + "'");
    }
}

int ExperimentConfig::n_samples() const
{
    return static_cast<int>(std::lround(total_time / sampling.delta));
}

EstimatorConfig ExperimentConfig::estimator_config(std::uint64_t seed_for_run) const
{
    EstimatorConfig ec;
    ec.eb.em_iters = em_iters;
    ec.eb.n_samples = q_samples;
    ec.eb.burn_in = q_burn_in;
    ec.eb.seed = derive_seed(seed_for_run, 2);
    ec.eb.mstep.budget = mstep_budget;
    ec.gaussian.mstep.budget = mstep_budget;
    return ec;
}

nlohmann::json config_to_json(const ExperimentConfig& c)
{
    return {{"plant_m", c.plant.m},
            {"plant_d", c.plant.d},
            {"plant_k", c.plant.k},
            {"total_time", c.total_time},
            {"delta", c.sampling.delta},
            {"h", c.sampling.h},
            {"sim_substeps", c.sampling.sim_substeps},
            {"delta_u", c.delta_u},
            {"noise_std", c.noise_std},
            {"input_std", c.input_std},
            {"n_runs", c.n_runs},
            {"seed", c.seed},
            {"em_iters", c.em_iters},
            {"q_samples", c.q_samples},
            {"q_burn_in", c.q_burn_in},
            {"mstep_budget", c.mstep_budget},
            {"estimators", c.estimators},
            {"record_wall_time", c.record_wall_time},
            {"n_threads", c.n_threads},
            {"impulse_horizon", c.impulse_horizon},
            {"impulse_step", c.impulse_step}};
}

ExperimentConfig config_from_json(const nlohmann::json& j)
{
    if (!j.is_object())
        throw ValidationError("config: expected a JSON object");
    ExperimentConfig c;
    const nlohmann::json defaults = config_to_json(c);
    for (const auto& [key, _] : j.items())
        if (!defaults.contains(key))
            throw ValidationError("config: unknown key '" + key + "'");
    try {
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key))
                field = j.at(key).get<std::decay_t<decltype(field)>>();
        };
        get("plant_m", c.plant.m);
        get("plant_d", c.plant.d);
        get("plant_k", c.plant.k);
        get("total_time", c.total_time);
        get("delta", c.sampling.delta);
        get("h", c.sampling.h);
        get("sim_substeps", c.sampling.sim_substeps);
        get("delta_u", c.delta_u);
        get("noise_std", c.noise_std);
        get("input_std", c.input_std);
        get("n_runs", c.n_runs);
        get("seed", c.seed);
        get("em_iters", c.em_iters);
        get("q_samples", c.q_samples);
        get("q_burn_in", c.q_burn_in);
        get("mstep_budget", c.mstep_budget);
        get("estimators", c.estimators);
        get("record_wall_time", c.record_wall_time);
        get("n_threads", c.n_threads);
        get("impulse_horizon", c.impulse_horizon);
        get("impulse_step", c.impulse_step);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("config: bad value: ") + e.what());
    }
    c.validate();
    return c;
}

std::uint64_t run_seed(const ExperimentConfig& cfg, int run_id)
{
    return derive_seed(cfg.seed, static_cast<std::uint64_t>(run_id));
}

SimulatedRun simulate_run(const ExperimentConfig& cfg, int run_id)
{
    cfg.validate();
    SimulatedRun run;
    run.run_seed = run_seed(cfg, run_id);
    const int n = cfg.n_samples();
    const int sub = cfg.sampling.sim_substeps;

    Rng input_rng(derive_seed(run.run_seed, 0));
    Rng noise_rng(derive_seed(run.run_seed, 1));
    std::normal_distribution<double> normal(0.0, 1.0);

    ZohInput u;
    u.delta_u = cfg.delta_u;
    const auto n_holds = static_cast<std::size_t>(std::ceil(cfg.total_time / cfg.delta_u - 1e-9));
    for (std::size_t k = 0; k < n_holds; ++k)
        u.amplitudes.push_back(cfg.input_std * normal(input_rng));

    const StateSpace ss = plant_to_ss(cfg.plant);
    const std::vector<double> x_fine =
        simulate_noiseless(ss, u, cfg.sampling.fine_step(), n * sub);

    std::vector<double> noise(static_cast<std::size_t>(n) + 1);
    for (double& e : noise)
        e = cfg.noise_std * normal(noise_rng);
    // Noise enters at the delta grid and is held in between.
    std::vector<double> z_fine(x_fine.size());
    for (std::size_t k = 0; k < x_fine.size(); ++k)
        z_fine[k] = x_fine[k] + noise[k / static_cast<std::size_t>(sub)];

    run.x.resize(static_cast<std::size_t>(n) + 1);
    std::vector<double> z(static_cast<std::size_t>(n));
    for (int i = 0; i <= n; ++i)
        run.x[static_cast<std::size_t>(i)] = x_fine[static_cast<std::size_t>(i) * sub];
    for (int i = 1; i <= n; ++i)
        z[static_cast<std::size_t>(i) - 1] = z_fine[static_cast<std::size_t>(i) * sub];

    run.ds.input = u;
    run.ds.bands = band_sequence(z_fine, cfg.sampling);
    run.ds.oracle_z = std::move(z);
    run.ds.events = detect_events(z_fine, cfg.sampling.fine_step(), cfg.sampling.h);
    run.ds.validate();
    return run;
}

namespace {

nlohmann::json rho_json(const Hyperparameters& r)
{
    return {{"gamma", r.gamma}, {"beta", r.beta}, {"sigma2", r.sigma2}};
}

nlohmann::json eb_trace_json(const EbTrace& t)
{
    auto rhos = nlohmann::json::array();
    for (const auto& r : t.rho_per_iter)
        rhos.push_back(rho_json(r));
    return {{"rho_per_iter", rhos},
            {"mstep_objective_start", t.mstep_objective_start},
            {"mstep_objective_end", t.mstep_objective_end},
            {"iteration_seeds", t.iteration_seeds},
            {"n_samples", t.n_samples},
            {"burn_in", t.burn_in},
            {"seed", t.seed}};
}

std::vector<double> impulse_grid(const ExperimentConfig& cfg)
{
    const auto n = static_cast<std::size_t>(std::floor(cfg.impulse_horizon / cfg.impulse_step + 1e-9));
    std::vector<double> t(n + 1);
    for (std::size_t k = 0; k <= n; ++k)
        t[k] = static_cast<double>(k) * cfg.impulse_step;
    return t;
}

}  // namespace

RunResult execute_run(const ExperimentConfig& cfg, int run_id)
{
    RunResult res;
    res.run_id = run_id;
    SimulatedRun sim;
    try {
        sim = simulate_run(cfg, run_id);
    } catch (const std::exception& e) {
        res.error = e.what();
        for (const auto& name : cfg.estimators)
            res.outcomes[name].error = e.what();
        res.trace = {{"run_id", run_id}, {"error", e.what()}};
        return res;
    }
    res.n_events = sim.ds.events->size();
    res.n_samples = sim.ds.size();
    const std::vector<double> x_ref(sim.x.begin() + 1, sim.x.end());
    const std::vector<double> t_grid = impulse_grid(cfg);
    const EstimatorConfig ec = cfg.estimator_config(sim.run_seed);

    const StateSpace ss = plant_to_ss(cfg.plant);
    std::vector<double> g_true;
    for (double t : t_grid)
        g_true.push_back(true_impulse(ss, t));

    nlohmann::json trace = {{"run_id", run_id},
                            {"run_seed", sim.run_seed},
                            {"dataset", dataset_to_json(sim.ds)},
                            {"noiseless_output", sim.x},
                            {"impulse_t", t_grid},
                            {"impulse_true", g_true}};
    nlohmann::json est_json = nlohmann::json::object();

    for (const auto& name : cfg.estimators) {
        EstimatorOutcome out;
        nlohmann::json extra = nlohmann::json::object();
        const auto start = std::chrono::steady_clock::now();
        try {
            ImpulseEstimate est;
            if (name == "leb") {
                LebesgueEstimate le = estimate_lebesgue(sim.ds, ec);
                extra["eb_trace"] = eb_trace_json(le.trace);
                extra["em_objective"] = le.weights.objective_trace;
                extra["em_converged"] = le.weights.converged;
                est = std::move(le.estimate);
            } else {
                est = estimate_baseline(sim.ds, ec,
                                        name == "or" ? BaselineSource::oracle
                                                     : BaselineSource::midpoint);
            }
            const std::vector<double> pred(est.predicted.data(),
                                           est.predicted.data() + est.predicted.size());
            out.fit = fit_metric(pred, x_ref);
            out.rho = est.rho;
            out.impulse = est.impulse(t_grid);
            out.ok = true;
        } catch (const std::exception& e) {
            out.error = e.what();
        }
        out.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        nlohmann::json ej = extra;
        ej["ok"] = out.ok;
        if (out.ok) {
            ej["fit"] = out.fit;
            ej["rho"] = rho_json(out.rho);
            ej["impulse"] = out.impulse;
        } else {
            ej["error"] = out.error;
        }
        est_json[name] = std::move(ej);
        res.outcomes[name] = std::move(out);
    }
    trace["estimates"] = std::move(est_json);
    res.trace = std::move(trace);
    return res;
}

double quantile_sorted(std::span<const double> sorted, double p)
{
    if (sorted.empty())
        throw ValidationError("quantile of empty data");
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

CaseStudySummary summarize(std::span<const RunResult> results,
                           const std::vector<std::string>& estimators)
{
    CaseStudySummary s;
    s.n_runs = static_cast<int>(results.size());
    double events = 0.0, samples = 0.0;
    int simulated = 0;
    for (const auto& r : results) {
        for (const auto& [_, o] : r.outcomes)
            s.total_wall_time_s += o.wall_time_s;
        if (r.error)
            continue;
        ++simulated;
        events += static_cast<double>(r.n_events);
        samples += static_cast<double>(r.n_samples);
    }
    if (simulated > 0) {
        s.mean_n_events = events / simulated;
        s.mean_n_samples = samples / simulated;
    }
    for (const auto& name : estimators) {
        FitSummary f;
        std::vector<double> fits;
        for (const auto& r : results) {
            const auto it = r.outcomes.find(name);
            if (it != r.outcomes.end() && it->second.ok)
                fits.push_back(it->second.fit);
            else
                ++f.n_failed;
        }
        f.n_ok = static_cast<int>(fits.size());
        if (!fits.empty()) {
            std::sort(fits.begin(), fits.end());
            f.mean = std::accumulate(fits.begin(), fits.end(), 0.0) / static_cast<double>(fits.size());
            f.median = quantile_sorted(fits, 0.5);
            f.q1 = quantile_sorted(fits, 0.25);
            f.q3 = quantile_sorted(fits, 0.75);
            f.min = fits.front();
            f.max = fits.back();
        }
        s.fits[name] = f;
    }
    return s;
}

CaseStudy run_case_study(const ExperimentConfig& cfg)
{
    cfg.validate();
    CaseStudy study;
    study.runs.resize(static_cast<std::size_t>(cfg.n_runs));
    const int workers = std::min(cfg.n_threads, std::max(cfg.n_runs, 1));
    if (workers <= 1) {
        for (int k = 0; k < cfg.n_runs; ++k)
            study.runs[static_cast<std::size_t>(k)] = execute_run(cfg, k);
    } else {
        std::mutex mu;
        int next = 0;
        auto worker = [&] {
            for (;;) {
                int k;
                {
                    std::lock_guard lock(mu);
                    if (next >= cfg.n_runs)
                        return;
                    k = next++;
                }
                study.runs[static_cast<std::size_t>(k)] = execute_run(cfg, k);
            }
        };
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back(worker);
        for (auto& t : pool)
            t.join();
    }
    study.summary = summarize(study.runs, cfg.estimators);
    return study;
}

namespace {

std::string fmt17(double v)
{
    if (std::isnan(v))
        return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string runs_csv(std::span<const RunResult> results,
                     const std::vector<std::string>& estimators, bool record_wall_time)
{
    std::string out = "run_id,estimator,fit,n_events,gamma_hat,beta_hat,sigma2_hat,wall_time_s\n";
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& r : results) {
        for (const auto& name : estimators) {
            const auto it = r.outcomes.find(name);
            const bool ok = it != r.outcomes.end() && it->second.ok;
            const EstimatorOutcome empty;
            const EstimatorOutcome& o = it != r.outcomes.end() ? it->second : empty;
            out += std::to_string(r.run_id) + ',' + name + ',' + fmt17(ok ? o.fit : nan) + ',' +
                   std::to_string(r.n_events) + ',' + fmt17(ok ? o.rho.gamma : nan) + ',' +
                   fmt17(ok ? o.rho.beta : nan) + ',' + fmt17(ok ? o.rho.sigma2 : nan) + ',' +
                   fmt17(record_wall_time ? o.wall_time_s : 0.0) + '\n';
        }
    }
    return out;
}

nlohmann::json summary_to_json(const CaseStudySummary& s, const ExperimentConfig& cfg)
{
    nlohmann::json fits = nlohmann::json::object();
    for (const auto& [name, f] : s.fits)
        fits[name] = {{"n_ok", f.n_ok},     {"n_failed", f.n_failed}, {"mean", f.mean},
                      {"median", f.median}, {"q1", f.q1},             {"q3", f.q3},
                      {"min", f.min},       {"max", f.max}};
    return {{"n_runs", s.n_runs},
            {"mean_n_events", s.mean_n_events},
            {"mean_n_samples", s.mean_n_samples},
            {"fits", fits},
            {"total_wall_time_s", s.total_wall_time_s},
            {"config", config_to_json(cfg)}};
}

void emit_results(const CaseStudy& study, const ExperimentConfig& cfg,
                  const std::filesystem::path& out_dir)
{
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "traces", ec);
    if (ec)
        throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());
    write_text_file(runs_csv(study.runs, cfg.estimators, cfg.record_wall_time),
                    out_dir / "runs.csv");
    write_json_file(summary_to_json(study.summary, cfg), out_dir / "summary.json");
    for (const auto& r : study.runs)
        write_json_file(r.trace, out_dir / "traces" / ("run_" + std::to_string(r.run_id) + ".json"));
}

}  // namespace lebid
