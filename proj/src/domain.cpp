#include "lebid/domain.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "lebid/errors.hpp"
#include "lebid/json_io.hpp"

namespace lebid {

namespace {

void require_finite(double v, const char* what)
{
    if (!std::isfinite(v))
        throw ValidationError(std::string(what) + " is not finite");
}

}  // namespace

bool on_grid(double value, double unit)
{
    const double ratio = value / unit;
    const double nearest = std::round(ratio);
    return std::abs(ratio - nearest) <= grid_tolerance * std::max(1.0, std::abs(ratio));
}

void SamplingConfig::validate() const
{
    if (!(delta > 0.0) || !std::isfinite(delta))
        throw ValidationError("sampling: delta must be positive");
    if (!(h > 0.0) || !std::isfinite(h))
        throw ValidationError("sampling: h must be positive");
    if (sim_substeps < 1)
        throw ValidationError("sampling: sim_substeps must be >= 1");
}

void ZohInput::validate() const
{
    if (!(delta_u > 0.0) || !std::isfinite(delta_u))
        throw ValidationError("input: delta_u must be positive");
    if (amplitudes.empty())
        throw ValidationError("input: amplitudes must be nonempty");
    if (t0 != 0.0)
        throw ValidationError("input: t0 must be 0");
    for (double a : amplitudes)
        require_finite(a, "input amplitude");
}

void ZohInput::validate_against(double delta) const
{
    validate();
    if (!on_grid(delta_u, delta))
        throw ValidationError("input: delta_u is not an integer multiple of delta");
}

double ZohInput::value(double t) const
{
    if (t < 0.0)
        return 0.0;
    const auto k = static_cast<std::size_t>(std::floor(t / delta_u));
    return k < amplitudes.size() ? amplitudes[k] : 0.0;
}

int ZohInput::hold_cells(double delta) const
{
    if (!on_grid(delta_u, delta))
        throw ValidationError("input: delta_u is not an integer multiple of delta");
    return static_cast<int>(std::lround(delta_u / delta));
}

std::vector<double> ZohInput::cell_values(double delta, int n_cells) const
{
    const int r = hold_cells(delta);
    std::vector<double> out(static_cast<std::size_t>(std::max(n_cells, 0)), 0.0);
    for (int k = 0; k < n_cells; ++k) {
        const auto seg = static_cast<std::size_t>(k / r);
        out[k] = seg < amplitudes.size() ? amplitudes[seg] : 0.0;
    }
    return out;
}

void BandSequence::validate() const
{
    if (!(h > 0.0) || !std::isfinite(h))
        throw ValidationError("bands: h must be positive");
    if (!(delta > 0.0) || !std::isfinite(delta))
        throw ValidationError("bands: delta must be positive");
    if (eta.empty())
        throw ValidationError("bands: eta must be nonempty");
    for (double e : eta) {
        require_finite(e, "bands: eta");
        if (!on_grid(e, h))
            throw ValidationError("bands: eta not on grid");
    }
}

void Hyperparameters::validate() const
{
    if (!admissible())
        throw ValidationError("hyperparameters: gamma, beta, sigma2 must be finite and > 0");
}

bool Hyperparameters::admissible() const
{
    return gamma > 0.0 && beta > 0.0 && sigma2 > 0.0 && std::isfinite(gamma) &&
           std::isfinite(beta) && std::isfinite(sigma2);
}

void Dataset::validate() const
{
    bands.validate();
    input.validate_against(bands.delta);
    if (oracle_z) {
        if (oracle_z->size() != bands.size())
            throw ValidationError("dataset: oracle_z length differs from bands");
        for (std::size_t i = 0; i < oracle_z->size(); ++i) {
            require_finite((*oracle_z)[i], "dataset: oracle_z");
            if (!bands.contains(i, (*oracle_z)[i]))
                throw ValidationError("dataset: oracle_z[" + std::to_string(i) +
                                      "] outside its band");
        }
    }
    if (events) {
        for (std::size_t l = 0; l < events->size(); ++l) {
            const auto& ev = (*events)[l];
            require_finite(ev.t, "dataset: event time");
            if (ev.value != static_cast<double>(ev.m) * bands.h)
                throw ValidationError("dataset: event value is not m*h");
            if (ev.direction < -1 || ev.direction > 1)
                throw ValidationError("dataset: event direction must be -1, 0 or +1");
            if (l > 0 && !(ev.t > (*events)[l - 1].t))
                throw ValidationError("dataset: event times not strictly increasing");
        }
    }
}

bool operator==(const ZohInput& a, const ZohInput& b)
{
    return a.delta_u == b.delta_u && a.t0 == b.t0 && a.amplitudes == b.amplitudes;
}

bool operator==(const BandSequence& a, const BandSequence& b)
{
    return a.h == b.h && a.delta == b.delta && a.eta == b.eta;
}

bool operator==(const Dataset& a, const Dataset& b)
{
    return a.input == b.input && a.bands == b.bands && a.oracle_z == b.oracle_z &&
           a.events == b.events;
}

nlohmann::json dataset_to_json(const Dataset& ds)
{
    nlohmann::json j;
    j["schema_version"] = dataset_schema_version;
    j["input"] = {{"delta_u", ds.input.delta_u}, {"t0", ds.input.t0},
                  {"amplitudes", ds.input.amplitudes}};
    j["bands"] = {{"h", ds.bands.h}, {"delta", ds.bands.delta}, {"eta", ds.bands.eta}};
    if (ds.oracle_z)
        j["oracle_z"] = *ds.oracle_z;
    if (ds.events) {
        auto arr = nlohmann::json::array();
        for (const auto& ev : *ds.events)
            arr.push_back({{"t", ev.t}, {"value", ev.value}, {"m", ev.m},
                           {"direction", ev.direction}});
        j["events"] = std::move(arr);
    }
    return j;
}

Dataset dataset_from_json(const nlohmann::json& j)
{
    Dataset ds;
    try {
        const int version = j.at("schema_version").get<int>();
        if (version != dataset_schema_version)
            throw ValidationError("dataset: unsupported schema_version " +
                                  std::to_string(version));
        const auto& in = j.at("input");
        ds.input.delta_u = in.at("delta_u").get<double>();
        ds.input.t0 = in.value("t0", 0.0);
        ds.input.amplitudes = in.at("amplitudes").get<std::vector<double>>();
        const auto& b = j.at("bands");
        ds.bands.h = b.at("h").get<double>();
        ds.bands.delta = b.at("delta").get<double>();
        ds.bands.eta = b.at("eta").get<std::vector<double>>();
        if (j.contains("oracle_z") && !j["oracle_z"].is_null())
            ds.oracle_z = j["oracle_z"].get<std::vector<double>>();
        if (j.contains("events") && !j["events"].is_null()) {
            std::vector<CrossingEvent> evs;
            for (const auto& e : j["events"]) {
                CrossingEvent ev;
                ev.t = e.at("t").get<double>();
                ev.value = e.at("value").get<double>();
                ev.m = e.at("m").get<std::int64_t>();
                ev.direction = e.value("direction", 0);
                evs.push_back(ev);
            }
            ds.events = std::move(evs);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("dataset: malformed field: ") + e.what());
    }
    ds.validate();
    return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path)
{
    write_json_file(dataset_to_json(ds), path);
}

Dataset load_dataset(const std::filesystem::path& path)
{
    return dataset_from_json(read_json_file(path));
}


void write_text_file(std::string_view text, const std::filesystem::path& path)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("cannot open for writing: " + path.string());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        out.flush();
        if (!out) {
            out.close();
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw IoError("write failed: " + path.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot move file into place: " + path.string());
    }
}

void write_json_file(const nlohmann::json& j, const std::filesystem::path& path)
{
    write_text_file(j.dump(2) + "\n", path);
}

nlohmann::json read_json_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open for reading: " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("parse error in " + path.string() + ": " + e.what());
    }
}

}  // namespace lebid
