#include "fundus/synth.hpp"

#include <algorithm>
#include <cmath>

#include "fundus/errors.hpp"
#include "fundus/rng.hpp"

namespace fundus {

void SynthParams::validate() const {
    if (size < 16) throw ConfigInvalid("synth size must be >= 16");
    if (!(0.0 < disc_min && disc_min <= disc_max)) {
        throw ConfigInvalid("synth disc radius range invalid");
    }
    if (!(0.0 < cdr_min && cdr_min <= cdr_max && cdr_max < 1.0)) {
        throw ConfigInvalid("synth cdr range must be within (0,1)");
    }
    if (jitter < 0.0 || noise < 0.0) {
        throw ConfigInvalid("synth jitter and noise must be >= 0");
    }
    if (!(0.0 < cdr_threshold && cdr_threshold < 1.0)) {
        throw ConfigInvalid("synth cdr threshold must be in (0,1)");
    }
    // Disc (plus a 2px margin) must fit at the worst-case jitter.
    if (0.5 - jitter / 2.0 - disc_max < 2.0 / double(size)) {
        throw ConfigInvalid("synth disc does not fit: shrink disc_max or jitter");
    }
}

namespace {

struct Shade {
    double r, g, b;
};

Shade lerp(const Shade& a, const Shade& b, double t) {
    return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t,
            a.b + (b.b - a.b) * t};
}

std::uint8_t quantize(double v) {
    return std::uint8_t(std::clamp(std::llround(v), 0LL, 255LL));
}

std::string padded_id(std::size_t index, std::size_t count) {
    std::size_t digits = 4;
    for (std::size_t limit = 10000; limit < count; limit *= 10) ++digits;
    std::string s = std::to_string(index);
    return std::string(digits - std::min(digits, s.size()), '0') + s;
}

} // namespace

std::vector<Sample> synth_generate(const SynthParams& params, std::size_t count,
                                   std::vector<SynthTruth>* truths) {
    params.validate();
    if (count < 1) throw ConfigInvalid("synth count must be >= 1");

    const std::size_t S = params.size;
    const double half = double(S) / 2.0;

    std::vector<Sample> samples;
    samples.reserve(count);
    if (truths) truths->clear();

    for (std::size_t index = 0; index < count; ++index) {
        SplitMix64 rng = stream_for(params.seed, index);
        const double disc_ry = rng.uniform(params.disc_min, params.disc_max) *
                               double(S);
        const double ecc = rng.uniform(0.85, 1.0);
        const double cdr = rng.uniform(params.cdr_min, params.cdr_max);
        const double jx = rng.uniform(-params.jitter, params.jitter) * half;
        const double jy = rng.uniform(-params.jitter, params.jitter) * half;

        const double cx = half + jx, cy = half + jy;
        const double disc_rx = disc_ry * ecc;
        const double cup_ry = cdr * disc_ry, cup_rx = cdr * disc_rx;

        const Shade bg{150, 75, 35};
        const Shade disc_center{240, 190, 110}, disc_edge{215, 160, 80};
        const Shade cup_center{255, 235, 170}, cup_edge{245, 210, 140};

        Sample sample;
        sample.id = padded_id(index, count);
        sample.image = RgbImage(S, S);
        sample.mask = LabelMask(S, S);
        sample.cdr = cdr;
        sample.glaucoma = cdr > params.cdr_threshold ? 1 : 0;

        for (std::size_t y = 0; y < S; ++y) {
            for (std::size_t x = 0; x < S; ++x) {
                const double ddx = (double(x) - cx) / disc_rx;
                const double ddy = (double(y) - cy) / disc_ry;
                const double dq = ddx * ddx + ddy * ddy;
                const double cdx = (double(x) - cx) / cup_rx;
                const double cdy = (double(y) - cy) / cup_ry;
                const double cq = cdx * cdx + cdy * cdy;

                Shade shade;
                std::uint8_t klass;
                if (cq <= 1.0) {
                    shade = lerp(cup_center, cup_edge, cq);
                    klass = kCupPixel;
                } else if (dq <= 1.0) {
                    shade = lerp(disc_center, disc_edge, dq);
                    klass = kRimPixel;
                } else {
                    const double nx = (double(x) - half) / half;
                    const double ny = (double(y) - half) / half;
                    const double falloff = 1.0 - 0.30 * (nx * nx + ny * ny) / 2.0;
                    shade = {bg.r * falloff, bg.g * falloff, bg.b * falloff};
                    klass = kBackgroundPixel;
                }
                sample.mask->at(y, x) = klass;
                double rgb[3] = {shade.r, shade.g, shade.b};
                for (std::size_t c = 0; c < 3; ++c) {
                    if (params.noise > 0.0) {
                        rgb[c] += rng.uniform(-params.noise, params.noise);
                    }
                    sample.image.at(y, x, c) = quantize(rgb[c]);
                }
            }
        }

        if (truths) truths->push_back({cx, cy, disc_rx, disc_ry, cdr});
        samples.push_back(std::move(sample));
    }
    return samples;
}

} // namespace fundus
