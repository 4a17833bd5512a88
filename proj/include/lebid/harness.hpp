#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lebid/domain.hpp"
#include "lebid/hyper_eb.hpp"
#include "lebid/lti_sim.hpp"
#include "lebid/weights.hpp"

namespace lebid {

// 100 (1 - ||x_hat - x|| / ||x - mean(x)||).
double fit_metric(std::span<const double> x_hat, std::span<const double> x);

struct ImpulseEstimate {
    std::string estimator;
    Hyperparameters rho;
    Eigen::VectorXd c;
    ZohInput input;
    double delta = 0.0;
    // K c: the estimated output at t = i*delta, i = 1..N.
    Eigen::VectorXd predicted;

    std::vector<double> impulse(std::span<const double> t_grid) const;
};

struct EstimatorConfig {
    EbOptions eb;
    EmOptions em;
    GaussianEbOptions gaussian;
    std::optional<Hyperparameters> rho_init;
};

struct LebesgueEstimate {
    ImpulseEstimate estimate;
    EbTrace trace;
    WeightSolution weights;
};

// EB over rho on the bands, then MAP-EM weights at the final rho.
LebesgueEstimate estimate_lebesgue(const Dataset& ds, const EstimatorConfig& cfg);

enum class BaselineSource { midpoint, oracle };

// Gaussian EB plus regularized LS on point data: band midpoints or the
// pre-quantization output.
ImpulseEstimate estimate_baseline(const Dataset& ds, const EstimatorConfig& cfg,
                                  BaselineSource source);

inline const std::vector<std::string> known_estimators{"leb", "rie", "or"};

struct ExperimentConfig {
    SecondOrderPlant plant;
    double total_time = 30.0;
    SamplingConfig sampling;
    double delta_u = 3.0;
    double noise_std = 0.05;
    double input_std = 3.2;
    int n_runs = 100;
    std::uint64_t seed = 1;
    int em_iters = 40;
    int q_samples = 1000;
    int q_burn_in = 200;
    int mstep_budget = 200;
    std::vector<std::string> estimators = known_estimators;
    bool record_wall_time = false;
    int n_threads = 1;
    // Grid for the reconstructed impulse responses written to traces.
    double impulse_horizon = 10.0;
    double impulse_step = 0.02;

    void validate() const;
    int n_samples() const;
    EstimatorConfig estimator_config(std::uint64_t run_seed) const;
};

nlohmann::json config_to_json(const ExperimentConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);

struct SimulatedRun {
    Dataset ds;
    // Noiseless output at t = i*delta, i = 0..N.
    std::vector<double> x;
    std::uint64_t run_seed = 0;
};

std::uint64_t run_seed(const ExperimentConfig& cfg, int run_id);
SimulatedRun simulate_run(const ExperimentConfig& cfg, int run_id);

struct EstimatorOutcome {
    bool ok = false;
    std::string error;
    double fit = 0.0;
    Hyperparameters rho;
    double wall_time_s = 0.0;
    std::vector<double> impulse;
};

struct RunResult {
    int run_id = 0;
    std::size_t n_events = 0;
    std::size_t n_samples = 0;
    std::map<std::string, EstimatorOutcome> outcomes;
    std::optional<std::string> error;
    nlohmann::json trace;
};

RunResult execute_run(const ExperimentConfig& cfg, int run_id);

struct FitSummary {
    int n_ok = 0;
    int n_failed = 0;
    double mean = 0.0;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double min = 0.0;
    double max = 0.0;
};

struct CaseStudySummary {
    int n_runs = 0;
    double mean_n_events = 0.0;
    double mean_n_samples = 0.0;
    std::map<std::string, FitSummary> fits;
    double total_wall_time_s = 0.0;
};

// Linear-interpolation quantile (R type 7) of sorted data.
double quantile_sorted(std::span<const double> sorted, double p);

CaseStudySummary summarize(std::span<const RunResult> results,
                           const std::vector<std::string>& estimators);

struct CaseStudy {
    std::vector<RunResult> runs;
    CaseStudySummary summary;
};

CaseStudy run_case_study(const ExperimentConfig& cfg);

std::string runs_csv(std::span<const RunResult> results,
                     const std::vector<std::string>& estimators, bool record_wall_time);
nlohmann::json summary_to_json(const CaseStudySummary& s, const ExperimentConfig& cfg);

// runs.csv, summary.json and traces/run_<k>.json under out_dir.
void emit_results(const CaseStudy& study, const ExperimentConfig& cfg,
                  const std::filesystem::path& out_dir);

}  // namespace lebid
