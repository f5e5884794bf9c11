#include "hmlet/gumbel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hmlet/dense.hpp"

namespace hmlet {

double gumbel_draw(Rng& rng) {
    double u = rng.next_double();
    u = std::clamp(u, 1e-12, 1.0 - 1e-12);
    return -std::log(-std::log(u));
}

std::vector<double> gumbel_sample(Rng& rng, std::size_t n) {
    if (n == 0) throw std::invalid_argument("gumbel_sample: n must be >= 1");
    std::vector<double> out(n);
    for (auto& g : out) g = gumbel_draw(rng);
    return out;
}

GateSample stgs(const std::array<double, 2>& logits, double tau, Rng& rng) {
    if (!(tau > 0.0)) throw std::invalid_argument("stgs: tau must be positive");
    GateSample s;
    s.logits = logits;
    s.noise = {gumbel_draw(rng), gumbel_draw(rng)};
    const std::array<double, 2> perturbed = {logits[0] + s.noise[0], logits[1] + s.noise[1]};
    const int hot = perturbed[0] >= perturbed[1] ? 0 : 1;
    s.hard = {hot == 0 ? 1.0 : 0.0, hot == 1 ? 1.0 : 0.0};
    const std::array<double, 2> scaled = {perturbed[0] / tau, perturbed[1] / tau};
    softmax(scaled, s.soft);
    return s;
}

} // namespace hmlet
