#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace lebid {

// Relative tolerance used when checking that a real value sits on an
// integer grid (eta on the h grid, delta_u on the delta grid).
inline constexpr double grid_tolerance = 1e-9;

bool on_grid(double value, double unit);

struct SamplingConfig {
    double delta = 0.1;    // fast detection period [s]
    double h = 1.0;        // threshold spacing
    int sim_substeps = 20; // fine-grid subdivisions of delta

    void validate() const;
    double fine_step() const { return delta / sim_substeps; }
};

// Piecewise-constant input: u(t) = amplitudes[k] on [k*delta_u, (k+1)*delta_u),
// zero before t0 = 0 and after the last hold interval.
struct ZohInput {
    double delta_u = 1.0;
    std::vector<double> amplitudes;
    double t0 = 0.0;

    void validate() const;
    void validate_against(double delta) const;
    double value(double t) const;
    // Hold periods measured in units of delta (validated integer).
    int hold_cells(double delta) const;
    // Value of u on the cell [k*delta, (k+1)*delta) for k = 0..n_cells-1.
    std::vector<double> cell_values(double delta, int n_cells) const;
    double end_time() const { return delta_u * static_cast<double>(amplitudes.size()); }
};

// Set-valued output: sample i (1-based in the math, 0-based here) lies in
// [eta[i], eta[i] + h).
struct BandSequence {
    std::vector<double> eta;
    double h = 1.0;
    double delta = 0.1;

    void validate() const;
    std::size_t size() const { return eta.size(); }
    double lower(std::size_t i) const { return eta[i]; }
    double upper(std::size_t i) const { return eta[i] + h; }
    bool contains(std::size_t i, double z) const { return z >= eta[i] && z < eta[i] + h; }
};

struct Hyperparameters {
    double gamma = 1.0;
    double beta = 1.0;
    double sigma2 = 1.0;

    void validate() const;
    bool admissible() const;
    bool operator==(const Hyperparameters&) const = default;
};

// A threshold crossing y_L(t_l) = m*h. direction is +1 for an upward
// crossing, -1 for a downward one. The initial report at t = 0 has
// direction 0 and names the band [m*h, (m+1)*h) containing z(0), or
// direction -1 when z(0) sits exactly on m*h and leaves downward.
struct CrossingEvent {
    double t = 0.0;
    double value = 0.0;
    std::int64_t m = 0;
    int direction = 0;

    bool operator==(const CrossingEvent&) const = default;
};

struct Dataset {
    ZohInput input;
    BandSequence bands;
    std::optional<std::vector<double>> oracle_z;
    std::optional<std::vector<CrossingEvent>> events;

    void validate() const;
    std::size_t size() const { return bands.size(); }
};

bool operator==(const ZohInput& a, const ZohInput& b);
bool operator==(const BandSequence& a, const BandSequence& b);
bool operator==(const Dataset& a, const Dataset& b);

inline constexpr int dataset_schema_version = 1;

void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace lebid
