#include "fundus/image.hpp"

#include <fstream>

#include "fundus/errors.hpp"

namespace fundus {

RgbImage::RgbImage(std::size_t w, std::size_t h)
    : width(w), height(h), pixels(w * h * 3, 0) {
    if (w == 0 || h == 0) throw FormatCorrupt("image dims must be >= 1");
}

Tensor RgbImage::to_tensor() const {
    Tensor t({1, 3, height, width});
    const double inv = 1.0 / 255.0;
    for (std::size_t c = 0; c < 3; ++c) {
        double* plane = t.data() + c * height * width;
        for (std::size_t y = 0; y < height; ++y) {
            for (std::size_t x = 0; x < width; ++x) {
                plane[y * width + x] = double(at(y, x, c)) * inv;
            }
        }
    }
    return t;
}

LabelMask::LabelMask(std::size_t w, std::size_t h)
    : width(w), height(h), pixels(w * h, kBackgroundPixel) {
    if (w == 0 || h == 0) throw FormatCorrupt("mask dims must be >= 1");
}

namespace {

// Next whitespace-delimited token, skipping '#' comments per the Netpbm spec.
std::string pnm_token(std::istream& in, const std::string& path) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(char(c));
    }
    if (tok.empty()) throw FormatCorrupt("truncated header in " + path);
    return tok;
}

std::size_t pnm_number(std::istream& in, const std::string& path) {
    const std::string tok = pnm_token(in, path);
    std::size_t v = 0;
    for (char ch : tok) {
        if (ch < '0' || ch > '9') {
            throw FormatCorrupt("bad header number '" + tok + "' in " + path);
        }
        v = v * 10 + std::size_t(ch - '0');
        if (v > (1u << 20)) throw FormatCorrupt("implausible dimension in " + path);
    }
    return v;
}

void read_payload(std::istream& in, std::uint8_t* dst, std::size_t n,
                  const std::string& path) {
    in.read(reinterpret_cast<char*>(dst), std::streamsize(n));
    if (std::size_t(in.gcount()) != n) {
        throw FormatCorrupt("truncated pixel data in " + path);
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw FormatCorrupt("trailing bytes in " + path);
    }
}

} // namespace

RgbImage read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + path);
    if (pnm_token(in, path) != "P6") throw FormatCorrupt("not a P6 PPM: " + path);
    const std::size_t w = pnm_number(in, path);
    const std::size_t h = pnm_number(in, path);
    if (pnm_number(in, path) != 255) {
        throw FormatCorrupt("PPM maxval must be 255: " + path);
    }
    if (w == 0 || h == 0) throw FormatCorrupt("zero dimension in " + path);
    // single whitespace byte separates header from payload; already consumed
    // by the tokenizer
    RgbImage img(w, h);
    read_payload(in, img.pixels.data(), img.pixels.size(), path);
    return img;
}

void write_ppm(const RgbImage& image, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot open " + path + " for writing");
    out << "P6\n" << image.width << " " << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()),
              std::streamsize(image.pixels.size()));
    out.flush();
    if (!out) throw IoFailure("write failed for " + path);
}

LabelMask read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + path);
    if (pnm_token(in, path) != "P5") throw FormatCorrupt("not a P5 PGM: " + path);
    const std::size_t w = pnm_number(in, path);
    const std::size_t h = pnm_number(in, path);
    if (pnm_number(in, path) != 255) {
        throw FormatCorrupt("PGM maxval must be 255: " + path);
    }
    if (w == 0 || h == 0) throw FormatCorrupt("zero dimension in " + path);
    LabelMask mask(w, h);
    read_payload(in, mask.pixels.data(), mask.pixels.size(), path);
    for (std::uint8_t v : mask.pixels) {
        if (v != kCupPixel && v != kRimPixel && v != kBackgroundPixel) {
            throw FormatCorrupt("mask value " + std::to_string(v) +
                                " outside {0,128,255} in " + path);
        }
    }
    return mask;
}

void write_pgm(const LabelMask& mask, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot open " + path + " for writing");
    out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(mask.pixels.data()),
              std::streamsize(mask.pixels.size()));
    out.flush();
    if (!out) throw IoFailure("write failed for " + path);
}

} // namespace fundus
