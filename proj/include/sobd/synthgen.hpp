#pragma once
// Synthetic corpus generator. Each class renders one textured object on a
// controlled background; the calibrated tone table makes interior texture
// steps of some classes exactly as strong as the silhouette steps of
// others, so appearance context, not local contrast, decides what counts
// as a boundary. Even/odd image indices alternate a background variant
// inside every class to give within-class clustering real structure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "sobd/base.hpp"
#include "sobd/image.hpp"
#include "sobd/manifest.hpp"
#include "sobd/parallel.hpp"
#include "sobd/png_io.hpp"
#include "sobd/random.hpp"

namespace sobd {

enum class SynthTexture { striped, plain, dotted };
enum class SynthBackground { smooth, cluttered };
enum class SynthShape { ellipse, capsule };

struct SynthClassSpec {
    SynthTexture texture = SynthTexture::plain;
    SynthBackground background = SynthBackground::smooth;
    SynthShape shape = SynthShape::ellipse;
};

struct SynthSpec {
    std::vector<SynthClassSpec> classes;
    int images_per_class = 100;
    int image_size = 128;
    double noise_sigma = 4.0 / 255.0;
    std::uint64_t seed = 7;
};

// Tone table. The striped interior step (high - low) equals the plain
// silhouette step (object - background), and the dot step matches it too;
// a detector cannot separate them by contrast alone.
inline constexpr float kStripeLow = 0.25f;
inline constexpr float kStripeHigh = 0.75f;
inline constexpr float kStripedBackground = 0.50f;
inline constexpr float kPlainBackground = 0.25f;
inline constexpr float kPlainObject = 0.75f;
inline constexpr float kClutterTone = 0.75f;
inline constexpr float kDottedBackground = 0.20f;
inline constexpr float kDottedObject = 0.65f;
inline constexpr float kDotTone = kDottedObject - (kPlainObject - kPlainBackground);
inline constexpr float kPlaidAmplitude = 0.08f;
inline constexpr float kPlaidPeriod = 12.0f;

static_assert(kStripeHigh - kStripeLow == kPlainObject - kPlainBackground);
static_assert(kDottedObject - kDotTone == kPlainObject - kPlainBackground);

// The default desk corpus: striped and dotted textures whose interiors
// mimic the plain classes' silhouettes, plus a cluttered background whose
// arcs reuse the plain object tone.
inline SynthSpec default_synth_spec() {
    SynthSpec spec;
    spec.classes = {
        {SynthTexture::striped, SynthBackground::smooth, SynthShape::ellipse},
        {SynthTexture::plain, SynthBackground::smooth, SynthShape::ellipse},
        {SynthTexture::plain, SynthBackground::cluttered, SynthShape::ellipse},
        {SynthTexture::dotted, SynthBackground::smooth, SynthShape::ellipse},
    };
    return spec;
}

namespace detail {

constexpr float kTau = 2.0f * std::numbers::pi_v<float>;

// Inside-depth in pixels: >= 0 inside the object, growing toward the
// center. The ellipse depth is approximate but adequate for margin tests.
struct ObjectGeometry {
    SynthShape shape = SynthShape::ellipse;
    float cx = 0, cy = 0;      // ellipse center / capsule endpoint 0
    float ex = 0, ey = 0;      // capsule endpoint 1
    float a = 1, b = 1;        // ellipse semi-axes
    float phi = 0;             // ellipse rotation
    float radius = 1;          // capsule radius

    float depth(float x, float y) const {
        if (shape == SynthShape::ellipse) {
            const float dx = x - cx, dy = y - cy;
            const float u = dx * std::cos(phi) + dy * std::sin(phi);
            const float v = -dx * std::sin(phi) + dy * std::cos(phi);
            const float q = std::sqrt((u / a) * (u / a) + (v / b) * (v / b));
            return (1.0f - q) * std::min(a, b);
        }
        const float vx = ex - cx, vy = ey - cy;
        const float len2 = vx * vx + vy * vy;
        float t = len2 > 0 ? ((x - cx) * vx + (y - cy) * vy) / len2 : 0.0f;
        t = std::clamp(t, 0.0f, 1.0f);
        const float dx = x - (cx + t * vx), dy = y - (cy + t * vy);
        return radius - std::sqrt(dx * dx + dy * dy);
    }
    bool inside(float x, float y) const { return depth(x, y) >= 0.0f; }
};

inline ObjectGeometry sample_object(int size, SynthShape shape, Rng& rng) {
    ObjectGeometry g;
    g.shape = shape;
    const float mid = size * 0.5f;
    const float wobble = size * 0.125f;
    if (shape == SynthShape::ellipse) {
        g.cx = mid + static_cast<float>(rng.uniform(-wobble, wobble));
        g.cy = mid + static_cast<float>(rng.uniform(-wobble, wobble));
        g.a = static_cast<float>(rng.uniform(0.14, 0.28)) * size;
        g.b = static_cast<float>(rng.uniform(0.14, 0.28)) * size;
        g.phi = static_cast<float>(rng.uniform(0.0, std::numbers::pi));
    } else {
        g.cx = mid + static_cast<float>(rng.uniform(-wobble, wobble));
        g.cy = mid + static_cast<float>(rng.uniform(-wobble, wobble));
        g.ex = mid + static_cast<float>(rng.uniform(-wobble, wobble));
        g.ey = mid + static_cast<float>(rng.uniform(-wobble, wobble));
        g.radius = static_cast<float>(rng.uniform(0.10, 0.17)) * size;
    }
    return g;
}

struct StripeField {
    float dirx = 1, diry = 0, phase = 0, band = 20;
    float tone(float x, float y) const {
        const float s = (x * dirx + y * diry + phase) / band;
        const int n = static_cast<int>(std::floor(s));
        return ((n % 2) + 2) % 2 == 0 ? kStripeLow : kStripeHigh;
    }
};

inline StripeField sample_stripes(Rng& rng) {
    StripeField f;
    const float theta = static_cast<float>(rng.uniform(0.0, std::numbers::pi));
    f.dirx = std::cos(theta);
    f.diry = std::sin(theta);
    f.band = static_cast<float>(rng.uniform(16.0, 24.0));
    f.phase = static_cast<float>(rng.uniform(0.0, 2.0 * f.band));
    return f;
}

struct Dot {
    float x, y, r;
};

inline std::vector<Dot> sample_dots(const ObjectGeometry& g, int size, Rng& rng) {
    // Rough object area from a coarse grid, one dot per ~260 px^2.
    int hits = 0;
    for (int y = 0; y < size; y += 4)
        for (int x = 0; x < size; x += 4)
            if (g.inside(x + 0.5f, y + 0.5f)) ++hits;
    const int want = std::max(3, hits * 16 / 260);
    std::vector<Dot> dots;
    for (int attempt = 0; attempt < want * 40 && static_cast<int>(dots.size()) < want;
         ++attempt) {
        Dot d;
        d.x = static_cast<float>(rng.uniform(0.0, size));
        d.y = static_cast<float>(rng.uniform(0.0, size));
        d.r = static_cast<float>(rng.uniform(2.0, 3.5));
        if (g.depth(d.x, d.y) >= d.r + 3.0f) dots.push_back(d);
    }
    return dots;
}

struct Arc {
    float cx, cy, r, start, span, thick;
};

inline std::vector<Arc> sample_arcs(int size, int count, Rng& rng) {
    std::vector<Arc> arcs(static_cast<std::size_t>(count));
    for (Arc& a : arcs) {
        a.cx = static_cast<float>(rng.uniform(0.0, size));
        a.cy = static_cast<float>(rng.uniform(0.0, size));
        a.r = static_cast<float>(rng.uniform(0.10, 0.35)) * size;
        a.start = static_cast<float>(rng.uniform(0.0, kTau));
        a.span = static_cast<float>(rng.uniform(0.6, 2.8));
        a.thick = static_cast<float>(rng.uniform(1.2, 2.2));
    }
    return arcs;
}

inline void draw_arc(std::vector<float>& canvas, int size, const Arc& a) {
    const int x0 = std::max(0, static_cast<int>(a.cx - a.r - a.thick - 1));
    const int x1 = std::min(size - 1, static_cast<int>(a.cx + a.r + a.thick + 1));
    const int y0 = std::max(0, static_cast<int>(a.cy - a.r - a.thick - 1));
    const int y1 = std::min(size - 1, static_cast<int>(a.cy + a.r + a.thick + 1));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const float dx = x + 0.5f - a.cx, dy = y + 0.5f - a.cy;
            const float d = std::sqrt(dx * dx + dy * dy);
            if (std::abs(d - a.r) > a.thick * 0.5f) continue;
            float ang = std::atan2(dy, dx) - a.start;
            ang -= kTau * std::floor(ang / kTau);
            if (ang <= a.span) canvas[static_cast<std::size_t>(y) * size + x] = kClutterTone;
        }
}

struct RenderedImage {
    Image image;
    LabeledSegmentation seg;
};

inline RenderedImage render_image(const SynthClassSpec& cls, int class_id, int size,
                                  bool plaid_variant, double noise_sigma, Rng& rng) {
    std::vector<float> canvas(static_cast<std::size_t>(size) * size);
    float bg = kPlainBackground;
    if (cls.texture == SynthTexture::striped) bg = kStripedBackground;
    if (cls.texture == SynthTexture::dotted) bg = kDottedBackground;
    std::fill(canvas.begin(), canvas.end(), bg);

    if (plaid_variant && cls.background == SynthBackground::smooth) {
        const float p1 = static_cast<float>(rng.uniform(0.0, kTau));
        const float p2 = static_cast<float>(rng.uniform(0.0, kTau));
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                canvas[static_cast<std::size_t>(y) * size + x] +=
                    kPlaidAmplitude * std::sin(kTau * x / kPlaidPeriod + p1) *
                    std::sin(kTau * y / kPlaidPeriod + p2);
    }
    if (cls.background == SynthBackground::cluttered) {
        // Arc density is the within-class variant cue for cluttered classes.
        const int count = plaid_variant ? 14 : 6;
        for (const Arc& a : sample_arcs(size, count, rng)) draw_arc(canvas, size, a);
    }

    const ObjectGeometry object = sample_object(size, cls.shape, rng);
    const StripeField stripes = sample_stripes(rng);
    const std::vector<Dot> dots =
        cls.texture == SynthTexture::dotted ? sample_dots(object, size, rng)
                                            : std::vector<Dot>{};

    LabeledSegmentation seg(size, size);
    seg.map_segment_to_class(1, static_cast<std::uint16_t>(class_id));
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const float px = x + 0.5f, py = y + 0.5f;
            if (!object.inside(px, py)) continue;
            seg.set_segment(x, y, 1);
            float tone = kPlainObject;
            if (cls.texture == SynthTexture::striped) tone = stripes.tone(px, py);
            if (cls.texture == SynthTexture::dotted) {
                tone = kDottedObject;
                for (const Dot& d : dots) {
                    const float dx = px - d.x, dy = py - d.y;
                    if (dx * dx + dy * dy <= d.r * d.r) {
                        tone = kDotTone;
                        break;
                    }
                }
            }
            canvas[static_cast<std::size_t>(y) * size + x] = tone;
        }

    Image img(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            float v = canvas[static_cast<std::size_t>(y) * size + x];
            v += static_cast<float>(rng.normal() * noise_sigma);
            const auto byte = static_cast<std::uint8_t>(
                std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
            img.set(x, y, byte, byte, byte);
        }
    return {std::move(img), std::move(seg)};
}

}  // namespace detail

// Renders the corpus into out_dir (images, segmentations, manifest.tsv)
// and returns the loaded-back manifest. The first 4/5 of every class is
// the train split, so both background variants land in both splits.
// Deterministic per seed, byte for byte.
inline DatasetManifest generate(const SynthSpec& spec, const std::string& out_dir) {
    require(spec.classes.size() >= 2, "synth: need at least 2 classes");
    require(spec.images_per_class >= 5, "synth: need at least 5 images per class");
    require(spec.image_size >= kMinForestImageSide, "synth: image size below ",
            kMinForestImageSide);
    require(spec.noise_sigma >= 0.0, "synth: negative noise level");
    std::filesystem::create_directories(out_dir);

    const int per = spec.images_per_class;
    const int train_count = per * 4 / 5;
    const std::size_t total = spec.classes.size() * static_cast<std::size_t>(per);

    std::vector<std::string> lines(total);
    parallel_for(0, total, [&](std::size_t idx) {
        const int ci = static_cast<int>(idx) / per;
        const int ii = static_cast<int>(idx) % per;
        const int class_id = ci + 1;
        Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(class_id),
                            static_cast<std::uint64_t>(ii)));
        const detail::RenderedImage r = detail::render_image(
            spec.classes[ci], class_id, spec.image_size, ii % 2 == 1, spec.noise_sigma,
            rng);

        const std::string stem = str_cat("c", class_id, "_", ii);
        const std::string img_name = stem + ".png";
        const std::string seg_name = stem + "_seg.png";
        write_image_png(out_dir + "/" + img_name, r.image);
        save_segmentation(out_dir + "/" + seg_name, r.seg);
        lines[idx] = str_cat(img_name, "\t", seg_name, "\t", class_id, "\t",
                             ii < train_count ? "train" : "test");
    });

    const std::string manifest_path = out_dir + "/manifest.tsv";
    {
        std::ofstream out(manifest_path, std::ios::binary);
        require(out.good(), "synth: cannot write ", manifest_path);
        for (const std::string& line : lines) out << line << '\n';
        require(out.good(), "synth: failed writing ", manifest_path);
    }
    return load_manifest(manifest_path);
}

}  // namespace sobd
