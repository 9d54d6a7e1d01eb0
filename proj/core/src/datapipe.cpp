#include "fundus/datapipe.hpp"

#include <algorithm>
#include <cmath>

#include "fundus/errors.hpp"
#include "fundus/text.hpp"

namespace fundus {

std::pair<std::size_t, std::size_t> locate_disc(const RgbImage& image,
                                                std::size_t blur_window) {
    if (blur_window < 1 || blur_window % 2 == 0) {
        throw ConfigInvalid("blur window must be odd and >= 1");
    }
    const std::ptrdiff_t W = std::ptrdiff_t(image.width);
    const std::ptrdiff_t H = std::ptrdiff_t(image.height);
    const std::ptrdiff_t r = std::ptrdiff_t(blur_window / 2);

    // Integer sums keep the argmax exact; ties resolve to the first
    // row-major position by strict comparison.
    std::uint64_t best = 0;
    std::size_t best_x = 0, best_y = 0;
    bool first = true;
    for (std::ptrdiff_t y = 0; y < H; ++y) {
        for (std::ptrdiff_t x = 0; x < W; ++x) {
            std::uint64_t sum = 0;
            for (std::ptrdiff_t dy = -r; dy <= r; ++dy) {
                const std::ptrdiff_t yy = std::clamp<std::ptrdiff_t>(y + dy, 0,
                                                                     H - 1);
                for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
                    const std::ptrdiff_t xx =
                        std::clamp<std::ptrdiff_t>(x + dx, 0, W - 1);
                    sum += image.at(std::size_t(yy), std::size_t(xx), 0);
                }
            }
            if (first || sum > best) {
                best = sum;
                best_x = std::size_t(x);
                best_y = std::size_t(y);
                first = false;
            }
        }
    }
    return {best_x, best_y};
}

std::pair<std::size_t, std::size_t> roi_origin(std::size_t width,
                                               std::size_t height,
                                               std::size_t cx, std::size_t cy,
                                               std::size_t size) {
    if (size < 1) throw ConfigInvalid("crop size must be >= 1");
    if (width < size || height < size) {
        throw ImageTooSmall("crop " + std::to_string(size) + " on " +
                            std::to_string(width) + "x" + std::to_string(height));
    }
    const auto clamp_origin = [size](std::size_t c, std::size_t limit) {
        const std::size_t half = size / 2;
        std::size_t o = c > half ? c - half : 0;
        return std::min(o, limit - size);
    };
    return {clamp_origin(cx, width), clamp_origin(cy, height)};
}

RgbImage crop_roi(const RgbImage& image, std::size_t cx, std::size_t cy,
                  std::size_t size) {
    const auto [x0, y0] = roi_origin(image.width, image.height, cx, cy, size);
    RgbImage out(size, size);
    for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                out.at(y, x, c) = image.at(y0 + y, x0 + x, c);
            }
        }
    }
    return out;
}

LabelMask crop_mask(const LabelMask& mask, std::size_t x0, std::size_t y0,
                    std::size_t size) {
    if (mask.width < x0 + size || mask.height < y0 + size) {
        throw ImageTooSmall("mask crop outside " + std::to_string(mask.width) +
                            "x" + std::to_string(mask.height));
    }
    LabelMask out(size, size);
    for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
            out.at(y, x) = mask.at(y0 + y, x0 + x);
        }
    }
    return out;
}

namespace {

// Corner-aligned source coordinate; single-pixel axes map to 0.
double src_coord(std::size_t dst, std::size_t dst_len, std::size_t src_len) {
    if (dst_len == 1 || src_len == 1) return 0.0;
    return double(dst) * double(src_len - 1) / double(dst_len - 1);
}

} // namespace

RgbImage resize_rgb(const RgbImage& image, std::size_t out_w, std::size_t out_h) {
    if (out_w < 1 || out_h < 1) throw ConfigInvalid("resize dims must be >= 1");
    RgbImage out(out_w, out_h);
    for (std::size_t y = 0; y < out_h; ++y) {
        const double sy = src_coord(y, out_h, image.height);
        const std::size_t y0 = std::size_t(std::floor(sy));
        const std::size_t y1 = std::min(y0 + 1, image.height - 1);
        const double fy = sy - double(y0);
        for (std::size_t x = 0; x < out_w; ++x) {
            const double sx = src_coord(x, out_w, image.width);
            const std::size_t x0 = std::size_t(std::floor(sx));
            const std::size_t x1 = std::min(x0 + 1, image.width - 1);
            const double fx = sx - double(x0);
            for (std::size_t c = 0; c < 3; ++c) {
                const double top = (1.0 - fx) * image.at(y0, x0, c) +
                                   fx * image.at(y0, x1, c);
                const double bot = (1.0 - fx) * image.at(y1, x0, c) +
                                   fx * image.at(y1, x1, c);
                const double v = (1.0 - fy) * top + fy * bot;
                out.at(y, x, c) =
                    std::uint8_t(std::clamp(std::llround(v), 0LL, 255LL));
            }
        }
    }
    return out;
}

LabelMask resize_mask(const LabelMask& mask, std::size_t out_w,
                      std::size_t out_h) {
    if (out_w < 1 || out_h < 1) throw ConfigInvalid("resize dims must be >= 1");
    LabelMask out(out_w, out_h);
    for (std::size_t y = 0; y < out_h; ++y) {
        const std::size_t sy = std::min(
            mask.height - 1,
            std::size_t(std::floor(src_coord(y, out_h, mask.height) + 0.5)));
        for (std::size_t x = 0; x < out_w; ++x) {
            const std::size_t sx = std::min(
                mask.width - 1,
                std::size_t(std::floor(src_coord(x, out_w, mask.width) + 0.5)));
            out.at(y, x) = mask.at(sy, sx);
        }
    }
    return out;
}

namespace {

// (y, x) in the output reads from map_src(y, x) in the input.
template <typename Src>
RgbImage transform_image(const RgbImage& in, std::size_t out_w,
                         std::size_t out_h, Src map_src) {
    RgbImage out(out_w, out_h);
    for (std::size_t y = 0; y < out_h; ++y) {
        for (std::size_t x = 0; x < out_w; ++x) {
            const auto [sy, sx] = map_src(y, x);
            for (std::size_t c = 0; c < 3; ++c) {
                out.at(y, x, c) = in.at(sy, sx, c);
            }
        }
    }
    return out;
}

template <typename Src>
LabelMask transform_mask(const LabelMask& in, std::size_t out_w,
                         std::size_t out_h, Src map_src) {
    LabelMask out(out_w, out_h);
    for (std::size_t y = 0; y < out_h; ++y) {
        for (std::size_t x = 0; x < out_w; ++x) {
            const auto [sy, sx] = map_src(y, x);
            out.at(y, x) = in.at(sy, sx);
        }
    }
    return out;
}

} // namespace

Sample augment(const Sample& sample, AugmentOp op) {
    const std::size_t W = sample.image.width, H = sample.image.height;
    if (sample.mask &&
        (sample.mask->width != W || sample.mask->height != H)) {
        throw ShapeMismatch("augment mask dims differ from image dims");
    }
    const bool rotation =
        op == AugmentOp::Rot90 || op == AugmentOp::Rot270;
    if (rotation && W != H) {
        throw NonSquareRotation("rotation of " + std::to_string(W) + "x" +
                                std::to_string(H) + " crop");
    }

    Sample out = sample;
    if (op == AugmentOp::Identity) return out;

    const auto src_for = [&](std::size_t y,
                             std::size_t x) -> std::pair<std::size_t, std::size_t> {
        switch (op) {
            case AugmentOp::Rot90: // clockwise
                return {H - 1 - x, y};
            case AugmentOp::Rot180:
                return {H - 1 - y, W - 1 - x};
            case AugmentOp::Rot270:
                return {x, W - 1 - y};
            case AugmentOp::FlipH:
                return {y, W - 1 - x};
            case AugmentOp::FlipV:
                return {H - 1 - y, x};
            default:
                return {y, x};
        }
    };
    out.image = transform_image(sample.image, W, H, src_for);
    if (sample.mask) out.mask = transform_mask(*sample.mask, W, H, src_for);
    return out;
}

std::vector<Sample> expand_dataset(const std::vector<Sample>& samples) {
    std::vector<Sample> out;
    out.reserve(samples.size() * kAugmentVariants);
    for (const Sample& s : samples) {
        for (std::size_t k = 0; k < kAugmentVariants; ++k) {
            Sample v;
            switch (k) {
                case 0: v = augment(s, AugmentOp::Identity); break;
                case 1: v = augment(s, AugmentOp::Rot90); break;
                case 2: v = augment(s, AugmentOp::Rot180); break;
                case 3: v = augment(s, AugmentOp::Rot270); break;
                case 4: v = augment(s, AugmentOp::FlipH); break;
                case 5: v = augment(s, AugmentOp::FlipV); break;
                case 6: v = augment(augment(s, AugmentOp::Rot90), AugmentOp::FlipH); break;
                default: v = augment(augment(s, AugmentOp::Rot90), AugmentOp::FlipV); break;
            }
            v.id = s.id + "_a" + std::to_string(k);
            out.push_back(std::move(v));
        }
    }
    return out;
}

Tensor encode_label(const LabelMask& mask) {
    Tensor t({1, 1, mask.height, mask.width});
    for (std::size_t i = 0; i < mask.pixels.size(); ++i) {
        t[i] = mask.pixels[i] == kCupPixel ? 0.0
               : mask.pixels[i] == kRimPixel ? 0.5
                                             : 1.0;
    }
    return t;
}

LabelMask decode_prediction(const Tensor& map, double t_cup, double t_disc) {
    if (!(0.0 < t_cup && t_cup < t_disc && t_disc < 1.0)) {
        throw ThresholdInvalid("need 0 < t_cup < t_disc < 1, got " +
                               format_double(t_cup) + ", " +
                               format_double(t_disc));
    }
    if (map.rank() != 4 || map.dim(0) != 1 || map.dim(1) != 1) {
        throw ShapeMismatch("decode expects [1,1,H,W], got " + map.shape_str());
    }
    LabelMask mask(map.dim(3), map.dim(2));
    for (std::size_t i = 0; i < map.size(); ++i) {
        mask.pixels[i] = map[i] < t_cup ? kCupPixel
                         : map[i] < t_disc ? kRimPixel
                                           : kBackgroundPixel;
    }
    return mask;
}

} // namespace fundus
