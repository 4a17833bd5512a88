#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "lebid/domain.hpp"
#include "lebid/lebesgue.hpp"
#include "lebid/lti_sim.hpp"
#include "lebid/random.hpp"

namespace fixture {

// Simulated mass-spring-damper data quantized at the delta grid, N samples.
struct Instance {
    lebid::Dataset ds;
    std::vector<double> x;  // noiseless output at i = 1..N
};

inline Instance lebesgue_instance(std::uint64_t seed, int n, double delta = 0.1, double h = 1.0,
                                  double delta_u = 1.0, double input_std = 3.0,
                                  double noise_std = 0.05)
{
    lebid::Rng rng(seed);
    std::normal_distribution<double> N01;
    lebid::ZohInput u;
    u.delta_u = delta_u;
    const int holds = static_cast<int>(std::ceil(n * delta / delta_u - 1e-9));
    for (int k = 0; k < holds; ++k)
        u.amplitudes.push_back(input_std * N01(rng));
    const auto ss = lebid::plant_to_ss({0.05, 0.2, 1.0});
    const auto x = lebid::simulate_noiseless(ss, u, delta, n);
    Instance inst;
    inst.ds.input = u;
    inst.ds.bands.h = h;
    inst.ds.bands.delta = delta;
    std::vector<double> z;
    for (int i = 1; i <= n; ++i) {
        const double zi = x[static_cast<std::size_t>(i)] + noise_std * N01(rng);
        z.push_back(zi);
        inst.ds.bands.eta.push_back(lebid::quantize_band(zi, h));
        inst.x.push_back(x[static_cast<std::size_t>(i)]);
    }
    inst.ds.oracle_z = z;
    return inst;
}

}  // namespace fixture
