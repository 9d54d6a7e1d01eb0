#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fundus/datapipe.hpp"
#include "fundus/dataset.hpp"
#include "fundus/errors.hpp"
#include "fundus/image.hpp"
#include "fundus/metrics.hpp"
#include "fundus/rng.hpp"
#include "fundus/synth.hpp"

using namespace fundus;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    return fs::temp_directory_path() / name;
}

RgbImage random_image(std::size_t w, std::size_t h, SplitMix64& rng) {
    RgbImage img(w, h);
    for (auto& p : img.pixels) p = (std::uint8_t)rng.below(256);
    return img;
}

LabelMask random_mask(std::size_t w, std::size_t h, SplitMix64& rng) {
    LabelMask m(w, h);
    constexpr std::uint8_t values[3] = {kCupPixel, kRimPixel, kBackgroundPixel};
    for (auto& p : m.pixels) p = values[rng.below(3)];
    return m;
}

std::vector<char> slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& path, const std::vector<char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), (std::streamsize)bytes.size());
}

// Vertical pixel extent of the disc (cup + rim) region.
std::size_t disc_extent(const LabelMask& mask) {
    std::size_t lo = mask.height, hi = 0;
    for (std::size_t y = 0; y < mask.height; ++y)
        for (std::size_t x = 0; x < mask.width; ++x)
            if (mask.at(y, x) != kBackgroundPixel) {
                lo = std::min(lo, y);
                hi = std::max(hi, y);
            }
    REQUIRE(lo <= hi);
    return hi - lo + 1;
}

} // namespace

TEST_CASE("ppm round trip is lossless, including 1x1") {
    SplitMix64 rng(1);
    for (auto [w, h] : {std::pair<std::size_t, std::size_t>{13, 7}, {1, 1}}) {
        RgbImage img = random_image(w, h, rng);
        const fs::path path = temp_file("roundtrip.ppm");
        write_ppm(img, path.string());
        RgbImage back = read_ppm(path.string());
        CHECK(back.width == img.width);
        CHECK(back.height == img.height);
        CHECK(back.pixels == img.pixels);

        // Writing the reread image reproduces the file byte for byte.
        const auto first = slurp(path);
        write_ppm(back, path.string());
        CHECK(slurp(path) == first);
        fs::remove(path);
    }
}

TEST_CASE("pgm round trip is lossless and rejects stray gray values") {
    SplitMix64 rng(2);
    LabelMask mask = random_mask(9, 5, rng);
    const fs::path path = temp_file("roundtrip.pgm");
    write_pgm(mask, path.string());
    CHECK(read_pgm(path.string()) == mask);

    auto bytes = slurp(path);
    bytes.back() = 77; // not in {0, 128, 255}
    spit(path, bytes);
    CHECK_THROWS_AS(read_pgm(path.string()), FormatCorrupt);
    fs::remove(path);
}

TEST_CASE("pnm readers reject malformed files") {
    const fs::path path = temp_file("bad.pnm");

    SUBCASE("wrong magic") {
        spit(path, {'P', '4', '\n', '1', ' ', '1', '\n', '2', '5', '5', '\n', 'x'});
        CHECK_THROWS_AS(read_ppm(path.string()), FormatCorrupt);
    }
    SUBCASE("truncated payload") {
        SplitMix64 rng(3);
        write_ppm(random_image(4, 4, rng), path.string());
        auto bytes = slurp(path);
        bytes.resize(bytes.size() - 5);
        spit(path, bytes);
        CHECK_THROWS_AS(read_ppm(path.string()), FormatCorrupt);
    }
    SUBCASE("trailing bytes") {
        SplitMix64 rng(4);
        write_ppm(random_image(4, 4, rng), path.string());
        auto bytes = slurp(path);
        bytes.push_back('\0');
        spit(path, bytes);
        CHECK_THROWS_AS(read_ppm(path.string()), FormatCorrupt);
    }
    SUBCASE("header comments are fine") {
        spit(path, {'P', '5', ' ', '#', 'c', '\n', '1', ' ', '1', ' ', '2', '5',
                    '5', '\n', (char)128});
        LabelMask m = read_pgm(path.string());
        CHECK(m.width == 1);
        CHECK(m.at(0, 0) == kRimPixel);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(read_ppm((path.string() + ".nope")), IoFailure);
    }
    fs::remove(path);
}

TEST_CASE("image to tensor scales to unit range") {
    RgbImage img(2, 1);
    img.at(0, 0, 0) = 255;
    img.at(0, 1, 2) = 51;
    Tensor t = img.to_tensor();
    CHECK(t.shape() == std::vector<std::size_t>{1, 3, 1, 2});
    CHECK(t.at(0, 0, 0, 0) == 1.0);
    CHECK(t.at(0, 2, 0, 1) == doctest::Approx(0.2));
    CHECK(t.at(0, 1, 0, 0) == 0.0);
}

TEST_CASE("locate_disc finds a single bright pixel with window 1") {
    RgbImage img(9, 7); // zero-initialized black
    img.at(5, 3, 0) = 200;
    CHECK(locate_disc(img, 1) == std::pair<std::size_t, std::size_t>{3, 5});
}

TEST_CASE("locate_disc breaks ties toward the smallest row then column") {
    RgbImage uniform(6, 6);
    for (auto& p : uniform.pixels) p = 90;
    CHECK(locate_disc(uniform, 3) == std::pair<std::size_t, std::size_t>{0, 0});
}

TEST_CASE("locate_disc requires an odd window") {
    RgbImage img(4, 4);
    CHECK_THROWS_AS(locate_disc(img, 2), ConfigInvalid);
    CHECK_THROWS_AS(locate_disc(img, 0), ConfigInvalid);
}

TEST_CASE("locate_disc hits the synthetic disc center statistically") {
    SynthParams params;
    params.seed = 2026;
    std::vector<SynthTruth> truths;
    const auto samples = synth_generate(params, 200, &truths);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        // Window on the order of the disc diameter: the blurred maximum then
        // sits at the centroid of the bright region rather than anywhere on
        // its plateau.
        const auto [cx, cy] = locate_disc(samples[i].image, 63);
        const double dx = (double)cx - truths[i].cx;
        const double dy = (double)cy - truths[i].cy;
        if (std::hypot(dx, dy) <= 0.1 * truths[i].disc_ry) ++hits;
    }
    CHECK(hits >= 190); // at least 95% of 200
}

TEST_CASE("crop_roi centers and clamps") {
    SplitMix64 rng(5);
    RgbImage img = random_image(50, 40, rng);

    RgbImage center = crop_roi(img, 25, 20, 10);
    CHECK(center.width == 10);
    CHECK(center.height == 10);
    CHECK(center.at(0, 0, 1) == img.at(15, 20, 1));

    // Near the corner the window translates instead of shrinking.
    CHECK(roi_origin(500, 500, 0, 0, 100) ==
          std::pair<std::size_t, std::size_t>{0, 0});
    RgbImage corner = crop_roi(img, 0, 0, 10);
    CHECK(corner.at(0, 0, 0) == img.at(0, 0, 0));
    RgbImage far = crop_roi(img, 49, 39, 10);
    CHECK(far.at(9, 9, 2) == img.at(39, 49, 2));

    CHECK_THROWS_AS(crop_roi(img, 25, 20, 60), ImageTooSmall);

    LabelMask mask = random_mask(50, 40, rng);
    LabelMask mcrop = crop_mask(mask, 3, 7, 10);
    CHECK(mcrop.width == 10);
    CHECK(mcrop.at(0, 0) == mask.at(7, 3));
    CHECK(mcrop.at(9, 9) == mask.at(16, 12));
}

TEST_CASE("rgb resize is corner-aligned bilinear") {
    RgbImage row(2, 1);
    row.at(0, 0, 0) = 0;
    row.at(0, 1, 0) = 10;
    RgbImage out = resize_rgb(row, 3, 1);
    CHECK(out.at(0, 0, 0) == 0);
    CHECK(out.at(0, 1, 0) == 5);
    CHECK(out.at(0, 2, 0) == 10);

    // Identity at equal dims; constant stays constant at any size.
    SplitMix64 rng(6);
    RgbImage img = random_image(7, 5, rng);
    CHECK(resize_rgb(img, 7, 5).pixels == img.pixels);
    RgbImage flat(4, 4);
    for (auto& p : flat.pixels) p = 123;
    RgbImage big = resize_rgb(flat, 11, 3);
    for (auto p : big.pixels) CHECK(p == 123);
}

TEST_CASE("mask resize is nearest neighbor and keeps legal values") {
    LabelMask m(2, 2);
    m.at(0, 0) = kCupPixel;
    m.at(0, 1) = kRimPixel;
    m.at(1, 0) = kBackgroundPixel;
    m.at(1, 1) = kCupPixel;
    LabelMask up = resize_mask(m, 4, 4);
    CHECK(up.width == 4);
    for (auto p : up.pixels) {
        CHECK((p == kCupPixel || p == kRimPixel || p == kBackgroundPixel));
    }
    CHECK(up.at(0, 0) == kCupPixel);
    CHECK(up.at(3, 3) == kCupPixel);
    CHECK(resize_mask(m, 2, 2) == m);
}

TEST_CASE("augment obeys the dihedral group laws") {
    SplitMix64 rng(7);
    Sample s;
    s.id = "x";
    s.image = random_image(12, 12, rng);
    s.mask = random_mask(12, 12, rng);
    s.glaucoma = 1;
    s.cdr = 0.42;

    Sample r = augment(s, AugmentOp::Rot90);
    for (int i = 0; i < 3; ++i) r = augment(r, AugmentOp::Rot90);
    CHECK(r.image.pixels == s.image.pixels);
    CHECK(*r.mask == *s.mask);
    CHECK(r.glaucoma == s.glaucoma);
    CHECK(r.cdr == s.cdr);

    CHECK(augment(augment(s, AugmentOp::FlipH), AugmentOp::FlipH).image.pixels ==
          s.image.pixels);
    CHECK(augment(augment(s, AugmentOp::FlipV), AugmentOp::FlipV).image.pixels ==
          s.image.pixels);

    // rot180 == flip_h . flip_v
    CHECK(augment(s, AugmentOp::Rot180).image.pixels ==
          augment(augment(s, AugmentOp::FlipV), AugmentOp::FlipH).image.pixels);

    CHECK(augment(s, AugmentOp::Identity).image.pixels == s.image.pixels);

    // rot90 of a known 2x2 checks the direction (clockwise).
    RgbImage two(2, 2);
    two.at(0, 0, 0) = 1;
    two.at(0, 1, 0) = 2;
    two.at(1, 0, 0) = 3;
    two.at(1, 1, 0) = 4;
    Sample t;
    t.id = "t";
    t.image = two;
    Sample rt = augment(t, AugmentOp::Rot90);
    CHECK(rt.image.at(0, 0, 0) == 3);
    CHECK(rt.image.at(0, 1, 0) == 1);
    CHECK(rt.image.at(1, 0, 0) == 4);
    CHECK(rt.image.at(1, 1, 0) == 2);
}

TEST_CASE("rotating a non-square sample is an error, flipping is fine") {
    SplitMix64 rng(8);
    Sample s;
    s.id = "ns";
    s.image = random_image(8, 4, rng);
    CHECK_THROWS_AS(augment(s, AugmentOp::Rot90), NonSquareRotation);
    CHECK_THROWS_AS(augment(s, AugmentOp::Rot270), NonSquareRotation);
    CHECK(augment(s, AugmentOp::FlipH).image.width == 8);
}

TEST_CASE("expand_dataset yields 8 distinct variants per sample") {
    SplitMix64 rng(9);
    std::vector<Sample> in;
    for (int i = 0; i < 5; ++i) {
        Sample s;
        s.id = "s" + std::to_string(i);
        s.image = random_image(6, 6, rng);
        s.mask = random_mask(6, 6, rng);
        in.push_back(std::move(s));
    }
    const auto out = expand_dataset(in);
    REQUIRE(out.size() == 5 * kAugmentVariants);
    CHECK(out[0].id == "s0_a0");
    CHECK(out[7].id == "s0_a7");
    CHECK(out[8].id == "s1_a0");
    // All 8 variants of one sample are pairwise distinct for a generic image.
    for (std::size_t a = 0; a < 8; ++a)
        for (std::size_t b = a + 1; b < 8; ++b)
            CHECK(out[a].image.pixels != out[b].image.pixels);
}

TEST_CASE("dice is invariant under a joint augmentation") {
    SplitMix64 rng(10);
    LabelMask a = random_mask(10, 10, rng), b = random_mask(10, 10, rng);
    Sample sa, sb;
    sa.id = sb.id = "m";
    sa.image = random_image(10, 10, rng);
    sb.image = sa.image;
    sa.mask = a;
    sb.mask = b;
    const double before = dice(cup_mask(a), cup_mask(b));
    Sample ra = augment(sa, AugmentOp::Rot270), rb = augment(sb, AugmentOp::Rot270);
    CHECK(dice(cup_mask(*ra.mask), cup_mask(*rb.mask)) == before);
}

TEST_CASE("encode and decode are inverse on 1000 random masks") {
    SplitMix64 rng(11);
    for (int i = 0; i < 1000; ++i) {
        LabelMask m = random_mask(1 + rng.below(12), 1 + rng.below(12), rng);
        Tensor t = encode_label(m);
        REQUIRE(t.shape() ==
                std::vector<std::size_t>{1, 1, m.height, m.width});
        CHECK(decode_prediction(t) == m);
    }
}

TEST_CASE("encode levels and decode thresholds") {
    LabelMask m(3, 1);
    m.at(0, 0) = kCupPixel;
    m.at(0, 1) = kRimPixel;
    m.at(0, 2) = kBackgroundPixel;
    Tensor t = encode_label(m);
    CHECK(t[0] == 0.0);
    CHECK(t[1] == 0.5);
    CHECK(t[2] == 1.0);

    Tensor probe({1, 1, 1, 3}, std::vector<double>{0.24, 0.5, 0.76});
    LabelMask d = decode_prediction(probe);
    CHECK(d.at(0, 0) == kCupPixel);
    CHECK(d.at(0, 1) == kRimPixel); // 0.5 falls in the rim band
    CHECK(d.at(0, 2) == kBackgroundPixel);

    CHECK_THROWS_AS(decode_prediction(probe, 0.75, 0.25), ThresholdInvalid);
    CHECK_THROWS_AS(decode_prediction(probe, 0.0, 0.5), ThresholdInvalid);
    CHECK_THROWS_AS(decode_prediction(probe, 0.25, 1.0), ThresholdInvalid);
}

TEST_CASE("synth generation is deterministic and order-independent") {
    SynthParams params;
    params.seed = 99;
    const auto a = synth_generate(params, 6);
    const auto b = synth_generate(params, 6);
    REQUIRE(a.size() == 6);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].id == b[i].id);
        CHECK(a[i].image.pixels == b[i].image.pixels);
        CHECK(*a[i].mask == *b[i].mask);
        CHECK(a[i].glaucoma == b[i].glaucoma);
        CHECK(a[i].cdr == b[i].cdr);
    }
    // Streams are per index: a shorter run matches the longer run's prefix.
    const auto c = synth_generate(params, 3);
    for (std::size_t i = 0; i < c.size(); ++i) {
        CHECK(c[i].image.pixels == a[i].image.pixels);
    }
    SynthParams other = params;
    other.seed = 100;
    CHECK(synth_generate(other, 1)[0].image.pixels != a[0].image.pixels);
}

TEST_CASE("synthetic masks agree with the recorded cdr") {
    SynthParams params;
    params.seed = 7;
    const auto samples = synth_generate(params, 60);
    for (const Sample& s : samples) {
        REQUIRE(s.mask);
        REQUIRE(s.cdr);
        const double measured = vertical_cdr(*s.mask);
        const double tol = 2.0 / (double)disc_extent(*s.mask);
        CHECK(std::abs(measured - *s.cdr) <= tol);
        CHECK(s.glaucoma == (*s.cdr > params.cdr_threshold ? 1 : 0));
    }
}

TEST_CASE("degenerate cdr range pins every sample at 0.5") {
    SynthParams params;
    params.cdr_min = params.cdr_max = 0.5;
    params.seed = 3;
    for (const Sample& s : synth_generate(params, 10)) {
        CHECK(*s.cdr == 0.5);
        CHECK(*s.glaucoma == 0);
    }
}

TEST_CASE("cup stays inside the disc through the pipeline") {
    SynthParams params;
    params.seed = 15;
    const auto samples = synth_generate(params, 10);
    for (const Sample& s : samples) {
        Sample cropped = s;
        const auto [cx, cy] = locate_disc(s.image, 63);
        const auto [x0, y0] = roi_origin(s.image.width, s.image.height, cx, cy, 120);
        cropped.image = crop_roi(s.image, cx, cy, 120);
        cropped.mask = crop_mask(*s.mask, x0, y0, 120);
        Sample aug = augment(cropped, AugmentOp::Rot90);
        const LabelMask small = resize_mask(*aug.mask, 64, 64);
        // Every cup pixel lies inside the disc region by construction.
        const BinaryMask cup = cup_mask(small), disc = disc_mask(small);
        for (std::size_t i = 0; i < cup.on.size(); ++i) {
            if (cup.on[i]) CHECK(disc.on[i] == 1);
        }
    }
}

TEST_CASE("synth params validation") {
    SynthParams p;
    p.cdr_min = 0.0;
    CHECK_THROWS_AS(p.validate(), ConfigInvalid);
    p = SynthParams{};
    p.cdr_max = 1.0;
    CHECK_THROWS_AS(p.validate(), ConfigInvalid);
    p = SynthParams{};
    p.disc_min = 0.45;
    p.disc_max = 0.30;
    CHECK_THROWS_AS(p.validate(), ConfigInvalid);
    p = SynthParams{};
    p.size = 0;
    CHECK_THROWS_AS(p.validate(), ConfigInvalid);
    SynthParams{}.validate();
}

TEST_CASE("dataset directory round trip") {
    SynthParams params;
    params.seed = 21;
    params.size = 64;
    auto samples = synth_generate(params, 4);
    samples[2].mask.reset(); // mask optional per sample
    samples[3].glaucoma.reset();
    samples[3].cdr.reset();

    const fs::path dir = temp_file("dataset_roundtrip");
    fs::remove_all(dir);
    write_dataset(dir.string(), samples);
    const auto back = read_dataset(dir.string());
    REQUIRE(back.size() == samples.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].id == samples[i].id);
        CHECK(back[i].image.pixels == samples[i].image.pixels);
        CHECK(back[i].mask.has_value() == samples[i].mask.has_value());
        if (samples[i].mask) CHECK(*back[i].mask == *samples[i].mask);
        CHECK(back[i].glaucoma == samples[i].glaucoma);
        if (samples[i].cdr) {
            CHECK(*back[i].cdr == doctest::Approx(*samples[i].cdr).epsilon(1e-15));
        } else {
            CHECK(!back[i].cdr);
        }
    }
    fs::remove_all(dir);
}

TEST_CASE("dataset reader rejects malformed layouts") {
    const fs::path dir = temp_file("dataset_bad");
    fs::remove_all(dir);
    fs::create_directories(dir / "images");

    SUBCASE("missing labels.csv") {
        CHECK_THROWS_AS(read_dataset(dir.string()), DatasetInvalid);
    }
    SUBCASE("bad header") {
        std::ofstream(dir / "labels.csv") << "id,label\n";
        CHECK_THROWS_AS(read_dataset(dir.string()), DatasetInvalid);
    }
    SUBCASE("duplicate id") {
        std::ofstream(dir / "labels.csv") << "id,glaucoma,cdr\na,0,\na,1,\n";
        CHECK_THROWS_AS(read_dataset(dir.string()), DatasetInvalid);
    }
    SUBCASE("listed id with no image") {
        std::ofstream(dir / "labels.csv") << "id,glaucoma,cdr\nghost,1,0.7\n";
        CHECK_THROWS_AS(read_dataset(dir.string()), DatasetInvalid);
    }
    SUBCASE("glaucoma out of range") {
        SplitMix64 rng(30);
        write_ppm(random_image(4, 4, rng), (dir / "images" / "a.ppm").string());
        std::ofstream(dir / "labels.csv") << "id,glaucoma,cdr\na,2,\n";
        CHECK_THROWS_AS(read_dataset(dir.string()), DatasetInvalid);
    }
    fs::remove_all(dir);
}
