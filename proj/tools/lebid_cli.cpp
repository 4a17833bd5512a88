#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lebid/domain.hpp"
#include "lebid/errors.hpp"
#include "lebid/harness.hpp"
#include "lebid/json_io.hpp"
#include "lebid/kernel.hpp"
#include "lebid/lebesgue.hpp"
#include "lebid/random.hpp"

using namespace lebid;

namespace {

// Flags bound to a scratch config; only those given on the command line are
// copied over the file-loaded config.
struct ConfigFlags {
    ExperimentConfig values;
    std::string config_path;
    std::vector<std::pair<CLI::Option*, std::function<void(ExperimentConfig&)>>> setters;

    template <class T>
    void add(CLI::App& app, const std::string& name, T ExperimentConfig::*field,
             const std::string& help)
    {
        auto* opt = app.add_option("--" + name, values.*field, help);
        setters.emplace_back(opt, [this, field](ExperimentConfig& c) { c.*field = values.*field; });
    }

    template <class S, class T>
    void add_nested(CLI::App& app, const std::string& name, S ExperimentConfig::*outer,
                    T S::*inner, const std::string& help)
    {
        auto* opt = app.add_option("--" + name, (values.*outer).*inner, help);
        setters.emplace_back(opt, [this, outer, inner](ExperimentConfig& c) {
            (c.*outer).*inner = (values.*outer).*inner;
        });
    }

    void attach(CLI::App& app)
    {
        app.add_option("--config", config_path, "JSON experiment config (flags override it)");
        add_nested(app, "plant_m", &ExperimentConfig::plant, &SecondOrderPlant::m, "mass");
        add_nested(app, "plant_d", &ExperimentConfig::plant, &SecondOrderPlant::d, "damping");
        add_nested(app, "plant_k", &ExperimentConfig::plant, &SecondOrderPlant::k, "stiffness");
        add(app, "total_time", &ExperimentConfig::total_time, "record length [s]");
        add_nested(app, "delta", &ExperimentConfig::sampling, &SamplingConfig::delta,
                   "detection period [s]");
        add_nested(app, "h", &ExperimentConfig::sampling, &SamplingConfig::h, "threshold spacing");
        add_nested(app, "sim_substeps", &ExperimentConfig::sampling,
                   &SamplingConfig::sim_substeps, "fine-grid subdivisions of delta");
        add(app, "delta_u", &ExperimentConfig::delta_u, "input hold period [s]");
        add(app, "noise_std", &ExperimentConfig::noise_std, "output noise standard deviation");
        add(app, "input_std", &ExperimentConfig::input_std, "input amplitude standard deviation");
        add(app, "n_runs", &ExperimentConfig::n_runs, "Monte Carlo runs");
        add(app, "seed", &ExperimentConfig::seed, "root seed");
        add(app, "em_iters", &ExperimentConfig::em_iters, "EB / MAP-EM iterations");
        add(app, "q_samples", &ExperimentConfig::q_samples, "Gibbs samples per second-moment estimate");
        add(app, "q_burn_in", &ExperimentConfig::q_burn_in, "Gibbs burn-in sweeps");
        add(app, "mstep_budget", &ExperimentConfig::mstep_budget, "objective evaluations per M-step");
        add(app, "estimators", &ExperimentConfig::estimators, "subset of leb, rie, or");
        add(app, "record_wall_time", &ExperimentConfig::record_wall_time,
            "write measured times into runs.csv");
        add(app, "n_threads", &ExperimentConfig::n_threads, "worker threads across runs");
        add(app, "impulse_horizon", &ExperimentConfig::impulse_horizon, "impulse grid end [s]");
        add(app, "impulse_step", &ExperimentConfig::impulse_step, "impulse grid step [s]");
    }

    ExperimentConfig resolve() const
    {
        ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{}
                                                   : config_from_json(read_json_file(config_path));
        for (const auto& [opt, set] : setters)
            if (opt->count() > 0)
                set(cfg);
        cfg.validate();
        return cfg;
    }
};

nlohmann::json rho_json(const Hyperparameters& r)
{
    return {{"gamma", r.gamma}, {"beta", r.beta}, {"sigma2", r.sigma2}};
}

int cmd_simulate(const ConfigFlags& flags, int run_id, const std::string& out)
{
    const ExperimentConfig cfg = flags.resolve();
    const SimulatedRun run = simulate_run(cfg, run_id);
    save_dataset(run.ds, out);
    std::cout << "wrote " << out << ": N=" << run.ds.size() << " N_L=" << run.ds.events->size()
              << "\n";
    return 0;
}

int cmd_estimate(const ConfigFlags& flags, const std::string& dataset_path,
                 const std::string& estimator, const std::string& out)
{
    const ExperimentConfig cfg = flags.resolve();
    const Dataset ds = load_dataset(dataset_path);
    const EstimatorConfig ec = cfg.estimator_config(derive_seed(cfg.seed, 0));
    nlohmann::json report;
    ImpulseEstimate est;
    if (estimator == "leb") {
        LebesgueEstimate le = estimate_lebesgue(ds, ec);
        report["em_objective"] = le.weights.objective_trace;
        report["em_iterations"] = le.weights.iterations_run;
        est = std::move(le.estimate);
    } else if (estimator == "rie" || estimator == "or") {
        est = estimate_baseline(ds, ec,
                                estimator == "or" ? BaselineSource::oracle : BaselineSource::midpoint);
    } else {
        throw ValidationError("unknown estimator '" + estimator + "'");
    }
    std::vector<double> t;
    for (double v = 0.0; v <= cfg.impulse_horizon + 1e-12; v += cfg.impulse_step)
        t.push_back(v);
    report["estimator"] = estimator;
    report["rho"] = rho_json(est.rho);
    report["c"] = std::vector<double>(est.c.data(), est.c.data() + est.c.size());
    report["predicted_output"] =
        std::vector<double>(est.predicted.data(), est.predicted.data() + est.predicted.size());
    report["impulse_t"] = t;
    report["impulse"] = est.impulse(t);
    if (out.empty())
        std::cout << report.dump(2) << "\n";
    else
        write_json_file(report, out);
    std::cerr << "gamma=" << est.rho.gamma << " beta=" << est.rho.beta
              << " sigma2=" << est.rho.sigma2 << "\n";
    return 0;
}

int cmd_benchmark(const ConfigFlags& flags, const std::string& out_dir)
{
    const ExperimentConfig cfg = flags.resolve();
    const CaseStudy study = run_case_study(cfg);
    emit_results(study, cfg, out_dir);
    const auto& s = study.summary;
    std::printf("runs=%d mean_N_L=%.2f (N=%.0f)\n", s.n_runs, s.mean_n_events, s.mean_n_samples);
    for (const auto& [name, f] : s.fits)
        std::printf("%-4s ok=%d failed=%d mean=%.3f median=%.3f q1=%.3f q3=%.3f\n", name.c_str(),
                    f.n_ok, f.n_failed, f.mean, f.median, f.q1, f.q3);
    return 0;
}

int cmd_inspect(const std::string& dataset_path)
{
    const Dataset ds = load_dataset(dataset_path);
    const auto n = ds.size();
    const auto [lo, hi] = std::minmax_element(ds.bands.eta.begin(), ds.bands.eta.end());
    std::printf("N=%zu delta=%g h=%g delta_u=%g holds=%zu\n", n, ds.bands.delta, ds.bands.h,
                ds.input.delta_u, ds.input.amplitudes.size());
    std::printf("band range [%g, %g)\n", *lo, *hi + ds.bands.h);
    if (ds.events)
        std::printf("N_L=%zu ratio=%.4f\n", ds.events->size(),
                    event_compression_ratio(ds.events->size(), n));
    std::printf("oracle_z=%s\n", ds.oracle_z ? "present" : "absent");
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Kernel-based impulse response identification from level-crossing data"};
    app.set_help_flag("--help", "print help");
    app.require_subcommand(1);

    ConfigFlags sim_flags, est_flags, bench_flags;
    int run_id = 0;
    std::string sim_out = "dataset.json";
    auto* sim = app.add_subcommand("simulate", "generate one dataset");
    sim_flags.attach(*sim);
    sim->add_option("--run_id", run_id, "run index used for seeding");
    sim->add_option("--out", sim_out, "output dataset JSON");

    std::string est_dataset, est_name = "leb", est_out;
    auto* est = app.add_subcommand("estimate", "estimate an impulse response from a dataset");
    est_flags.attach(*est);
    est->add_option("--dataset", est_dataset, "dataset JSON")->required();
    est->add_option("--estimator", est_name, "leb, rie or or");
    est->add_option("--out", est_out, "report JSON (stdout if omitted)");

    std::string bench_out = "results";
    auto* bench = app.add_subcommand("benchmark", "Monte Carlo case study");
    bench_flags.attach(*bench);
    bench->add_option("--out", bench_out, "output directory");

    std::string insp_dataset;
    auto* insp = app.add_subcommand("inspect", "dataset statistics");
    insp->add_option("--dataset", insp_dataset, "dataset JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (sim->parsed())
            return cmd_simulate(sim_flags, run_id, sim_out);
        if (est->parsed())
            return cmd_estimate(est_flags, est_dataset, est_name, est_out);
        if (bench->parsed())
            return cmd_benchmark(bench_flags, bench_out);
        if (insp->parsed())
            return cmd_inspect(insp_dataset);
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
