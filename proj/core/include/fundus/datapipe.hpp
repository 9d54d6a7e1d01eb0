#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fundus/image.hpp"

namespace fundus {

struct Sample {
    std::string id;
    RgbImage image;
    std::optional<LabelMask> mask;
    std::optional<int> glaucoma; // {0,1}
    std::optional<double> cdr;   // generator ground truth when known
};

// Box-blur the red channel (edge-clamped) and return the (x, y) of the
// maximum; ties broken by smallest row, then smallest column. Substitutes
// for a pretrained disc localizer: the disc is the brightest fundus region.
std::pair<std::size_t, std::size_t> locate_disc(const RgbImage& image,
                                                std::size_t blur_window);

// size x size window centered at (cx, cy), translated to lie fully inside
// the image near borders. Throws ImageTooSmall when the image cannot hold it.
std::pair<std::size_t, std::size_t> roi_origin(std::size_t width,
                                               std::size_t height,
                                               std::size_t cx, std::size_t cy,
                                               std::size_t size);
RgbImage crop_roi(const RgbImage& image, std::size_t cx, std::size_t cy,
                  std::size_t size);
LabelMask crop_mask(const LabelMask& mask, std::size_t x0, std::size_t y0,
                    std::size_t size);

// Corner-aligned bilinear for images, nearest neighbor for masks (labels
// must never be interpolated).
RgbImage resize_rgb(const RgbImage& image, std::size_t out_w, std::size_t out_h);
LabelMask resize_mask(const LabelMask& mask, std::size_t out_w,
                      std::size_t out_h);

enum class AugmentOp { Identity, Rot90, Rot180, Rot270, FlipH, FlipV };

// Image and mask transformed identically; label and cdr unchanged.
// Rotations require a square crop. Rot90 is clockwise.
Sample augment(const Sample& sample, AugmentOp op);

// All 8 dihedral variants per sample (the 6 ops above plus rot90 composed
// with each flip), ids suffixed _a0.._a7. 400 in -> 3200 out.
std::vector<Sample> expand_dataset(const std::vector<Sample>& samples);
inline constexpr std::size_t kAugmentVariants = 8;

// CUP -> 0.0, RIM -> 0.5, BACKGROUND -> 1.0 as [1,1,H,W].
Tensor encode_label(const LabelMask& mask);

// value < t_cup -> CUP, value < t_disc -> RIM, else BACKGROUND.
// Requires 0 < t_cup < t_disc < 1. Inverse of encode_label at the defaults.
LabelMask decode_prediction(const Tensor& map, double t_cup = 0.25,
                            double t_disc = 0.75);

} // namespace fundus
