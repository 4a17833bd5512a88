#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lebid/domain.hpp"

namespace lebid {

// Index m of the band [m*h, (m+1)*h) holding z (lower-inclusive).
std::int64_t band_index(double z, double h);

// Lower band edge eta = h * floor(z / h), with z in [eta, eta + h).
double quantize_band(double z, double h);

// Threshold crossings of a signal sampled at step fine_step. One event per
// threshold traversed between consecutive samples, times by linear
// interpolation. A tangency between samples never changes the sampled band
// and so emits nothing. The first event is the t = 0 report (see CrossingEvent).
std::vector<CrossingEvent> detect_events(std::span<const double> z_fine, double fine_step,
                                         double h);

// Bands at t = i*delta, i = 1..N, by direct quantization of the fine signal.
// z_fine must hold samples at step cfg.fine_step() covering 0..N*delta.
BandSequence band_sequence(std::span<const double> z_fine, const SamplingConfig& cfg);

// Same bands rebuilt only from the event stream by tracking the last
// crossing level and direction.
BandSequence bands_from_events(std::span<const CrossingEvent> events, std::size_t n,
                               const SamplingConfig& cfg);

std::vector<double> midpoint_data(const BandSequence& bands);

// N_L / N.
double event_compression_ratio(std::size_t n_events, std::size_t n);
inline double event_compression_ratio(std::span<const CrossingEvent> events, std::size_t n)
{
    return event_compression_ratio(events.size(), n);
}

}  // namespace lebid
