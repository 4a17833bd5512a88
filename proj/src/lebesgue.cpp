#include "lebid/lebesgue.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lebid/errors.hpp"

namespace lebid {

std::int64_t band_index(double z, double h)
{
    auto m = static_cast<std::int64_t>(std::floor(z / h));
    // floor(z / h) can land one band off when z / h rounds across an integer.
    while (z < static_cast<double>(m) * h)
        --m;
    while (z >= static_cast<double>(m + 1) * h)
        ++m;
    return m;
}

double quantize_band(double z, double h)
{
    return static_cast<double>(band_index(z, h)) * h;
}

namespace {

void push_event(std::vector<CrossingEvent>& events, CrossingEvent ev)
{
    auto& last = events.back();
    if (events.size() == 1 && last.direction == 0 && ev.t == last.t && ev.m == last.m &&
        ev.direction < 0) {
        // z(0) sits on the threshold and leaves downward.
        last.direction = -1;
        return;
    }
    // A fine sample exactly on m*h that turns back yields an up and a down
    // event at the same instant; both are kept so the sample stays in band m.
    if (!(ev.t > last.t))
        ev.t = std::nextafter(last.t, std::numeric_limits<double>::infinity());
    events.push_back(ev);
}

}  // namespace

std::vector<CrossingEvent> detect_events(std::span<const double> z_fine, double fine_step,
                                         double h)
{
    if (z_fine.empty())
        throw ValidationError("detect_events: empty signal");
    if (!(fine_step > 0.0) || !(h > 0.0))
        throw ValidationError("detect_events: fine_step and h must be positive");

    std::vector<CrossingEvent> events;
    std::int64_t band = band_index(z_fine[0], h);
    events.push_back({0.0, static_cast<double>(band) * h, band, 0});

    for (std::size_t k = 0; k + 1 < z_fine.size(); ++k) {
        const double z0 = z_fine[k];
        const double z1 = z_fine[k + 1];
        const std::int64_t next = band_index(z1, h);
        if (next == band)
            continue;
        const double dz = z1 - z0;
        const auto at = [&](std::int64_t m) {
            const double frac = std::clamp((static_cast<double>(m) * h - z0) / dz, 0.0, 1.0);
            return (static_cast<double>(k) + frac) * fine_step;
        };
        if (next > band) {
            for (std::int64_t m = band + 1; m <= next; ++m)
                push_event(events, {at(m), static_cast<double>(m) * h, m, +1});
        } else {
            for (std::int64_t m = band; m > next; --m)
                push_event(events, {at(m), static_cast<double>(m) * h, m, -1});
        }
        band = next;
    }
    return events;
}

BandSequence band_sequence(std::span<const double> z_fine, const SamplingConfig& cfg)
{
    cfg.validate();
    const auto sub = static_cast<std::size_t>(cfg.sim_substeps);
    if (z_fine.size() < sub + 1)
        throw ValidationError("band_sequence: signal shorter than one delta");
    const std::size_t n = (z_fine.size() - 1) / sub;
    BandSequence bands;
    bands.h = cfg.h;
    bands.delta = cfg.delta;
    bands.eta.reserve(n);
    for (std::size_t i = 1; i <= n; ++i)
        bands.eta.push_back(quantize_band(z_fine[i * sub], cfg.h));
    return bands;
}

BandSequence bands_from_events(std::span<const CrossingEvent> events, std::size_t n,
                               const SamplingConfig& cfg)
{
    cfg.validate();
    if (events.empty())
        throw ValidationError("bands_from_events: no events");
    const double step = cfg.fine_step();
    const auto sub = static_cast<std::size_t>(cfg.sim_substeps);

    BandSequence bands;
    bands.h = cfg.h;
    bands.delta = cfg.delta;
    bands.eta.reserve(n);

    // An upward crossing at t_l already holds at t_l; a downward one only
    // after it (lower-inclusive bands).
    const auto applies = [](const CrossingEvent& ev, double t) {
        return ev.direction > 0 ? t >= ev.t : t > ev.t;
    };
    const auto band_after = [](const CrossingEvent& ev) {
        return ev.direction < 0 ? ev.m - 1 : ev.m;
    };

    std::int64_t band = events[0].m;
    std::size_t next = 1;
    bool initial_pending = events[0].direction < 0;
    for (std::size_t i = 1; i <= n; ++i) {
        const double t = static_cast<double>(i * sub) * step;
        if (initial_pending && applies(events[0], t)) {
            band = band_after(events[0]);
            initial_pending = false;
        }
        while (next < events.size() && applies(events[next], t)) {
            band = band_after(events[next]);
            ++next;
        }
        bands.eta.push_back(static_cast<double>(band) * cfg.h);
    }
    return bands;
}

std::vector<double> midpoint_data(const BandSequence& bands)
{
    std::vector<double> out;
    out.reserve(bands.size());
    for (double e : bands.eta)
        out.push_back(e + 0.5 * bands.h);
    return out;
}

double event_compression_ratio(std::size_t n_events, std::size_t n)
{
    if (n == 0)
        throw ValidationError("event_compression_ratio: N must be >= 1");
    return static_cast<double>(n_events) / static_cast<double>(n);
}

}  // namespace lebid
