#pragma once

#include <cstdint>
#include <vector>

#include "fundus/datapipe.hpp"

namespace fundus {

struct SynthParams {
    std::size_t size = 160;
    double disc_min = 0.25; // disc vertical radius as fraction of size
    double disc_max = 0.40;
    double cdr_min = 0.2; // cup-to-disc vertical ratio range
    double cdr_max = 0.9;
    double jitter = 0.10;       // center offset range, fraction of size
    double noise = 8.0;         // uniform pixel noise amplitude, 8-bit units
    double cdr_threshold = 0.6; // glaucoma_label = 1 iff cdr > threshold
    std::uint64_t seed = 0;

    void validate() const;
};

struct SynthTruth {
    double cx, cy;
    double disc_rx, disc_ry;
    double cdr;
};

// Deterministic synthetic fundus images: noisy radial orange-brown
// background, bright yellowish disc ellipse shaded toward its center, and a
// concentric paler cup ellipse whose vertical ratio is the drawn CDR. The
// mask is rendered from the same ellipses. Each sample consumes an
// independent PRNG stream derived from (seed, index), so generation order
// never matters.
std::vector<Sample> synth_generate(const SynthParams& params, std::size_t count,
                                   std::vector<SynthTruth>* truths = nullptr);

} // namespace fundus
