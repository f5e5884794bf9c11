#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "hmlet/rng.hpp"

namespace hmlet {

// One straight-through Gumbel-softmax draw over two branches.
// hard is one-hot; soft is the tempered relaxation computed from the same
// noise, so argmax(soft) always agrees with the hot position.
struct GateSample {
    std::array<double, 2> hard;
    std::array<double, 2> soft;
    std::array<double, 2> logits;
    std::array<double, 2> noise;

    int selected() const { return hard[0] == 1.0 ? 0 : 1; }
};

// Unit Gumbel draw: -log(-log(u)), u uniform clamped to
// [1e-12, 1-1e-12] to keep the transform finite.
double gumbel_draw(Rng& rng);
std::vector<double> gumbel_sample(Rng& rng, std::size_t n);

// Straight-through Gumbel-softmax over a 2-way choice.
// soft_i = softmax((logits_i + g_i)/tau); hard = one_hot(argmax(logits + g)).
GateSample stgs(const std::array<double, 2>& logits, double tau, Rng& rng);

} // namespace hmlet
