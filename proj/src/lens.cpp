#include "fstack/lens.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "fstack/errors.hpp"
#include "fstack/rng.hpp"

namespace fstack {

void validate(const LensConfig& lens) {
    if (lens.focal_length_mm <= 0 || lens.f_number <= 0 ||
        lens.pixel_pitch_mm <= 0) {
        throw ConfigError("lens parameters must be positive");
    }
    if (!(lens.sensor_to_lens_range_mm.first > lens.focal_length_mm)) {
        throw ConfigError(
            "sensor_to_lens_range.min must exceed the focal length");
    }
    if (!(lens.sensor_to_lens_range_mm.second >=
          lens.sensor_to_lens_range_mm.first)) {
        throw ConfigError("sensor_to_lens_range must be ordered");
    }
}

void validate(const SceneConfig& cfg) {
    if (cfg.width <= 0 || cfg.height <= 0) {
        throw ConfigError("scene image area must be nonzero");
    }
    if (cfg.primitive_count < 1) {
        throw ConfigError("primitive_count must be >= 1");
    }
    if (!(cfg.depth_range_m.first > 0.0) ||
        !(cfg.depth_range_m.second >= cfg.depth_range_m.first) ||
        !(cfg.depth_range_m.second < 100.0)) {
        throw ConfigError("depth_range must satisfy 0 < near <= far < 100");
    }
    if (cfg.texture_scale < 0.0) {
        throw ConfigError("texture_scale must be non-negative");
    }
}

// ---------------------------------------------------------------------------
// Procedural textures

namespace {

std::uint64_t hash_mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic lattice value in [-1, 1] for integer coordinates.
double lattice_value(std::uint64_t salt, std::int64_t ix, std::int64_t iy) {
    std::uint64_t h = hash_mix(salt ^ (static_cast<std::uint64_t>(ix) * 0x9e3779b97f4a7c15ULL) ^
                               (static_cast<std::uint64_t>(iy) * 0xc2b2ae3d27d4eb4fULL));
    return static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;
}

double value_noise(std::uint64_t salt, double x, double y, double cell) {
    const double fx = x / cell;
    const double fy = y / cell;
    const auto ix = static_cast<std::int64_t>(std::floor(fx));
    const auto iy = static_cast<std::int64_t>(std::floor(fy));
    const double tx = fx - static_cast<double>(ix);
    const double ty = fy - static_cast<double>(iy);
    const double v00 = lattice_value(salt, ix, iy);
    const double v10 = lattice_value(salt, ix + 1, iy);
    const double v01 = lattice_value(salt, ix, iy + 1);
    const double v11 = lattice_value(salt, ix + 1, iy + 1);
    const double a = v00 + (v10 - v00) * tx;
    const double b = v01 + (v11 - v01) * tx;
    return a + (b - a) * ty;
}

// A surface texture: tinted base color modulated by one of three pattern
// families, plus fine hash grain so no region is entirely flat.
struct SurfaceTexture {
    int kind = 0;  // 0 checker, 1 grating, 2 value noise
    double base[3] = {128, 128, 128};
    double amplitude = 60.0;
    double grain = 6.0;
    double cell = 4.0;          // checker / noise lattice size
    double kx = 0.5, ky = 0.0;  // grating wave vector
    double phase = 0.0;
    std::uint64_t salt = 0;

    static SurfaceTexture draw(Rng& rng, double texture_scale) {
        SurfaceTexture t;
        t.kind = static_cast<int>(rng.uniform_int(3));
        for (double& c : t.base) c = rng.uniform(50.0, 205.0);
        t.amplitude = texture_scale * rng.uniform(30.0, 85.0);
        t.grain = texture_scale * rng.uniform(4.0, 9.0);
        t.cell = rng.uniform(2.5, 7.0);
        const double period = rng.uniform(4.0, 16.0);
        const double theta = rng.uniform(0.0, 6.28318530717958648);
        t.kx = std::cos(theta) * 6.28318530717958648 / period;
        t.ky = std::sin(theta) * 6.28318530717958648 / period;
        t.phase = rng.uniform(0.0, 6.28318530717958648);
        t.salt = rng.next_u64();
        return t;
    }

    void shade(double x, double y, std::uint8_t out[3]) const {
        double t = 0.0;
        switch (kind) {
            case 0: {
                const auto cx = static_cast<std::int64_t>(std::floor(x / cell));
                const auto cy = static_cast<std::int64_t>(std::floor(y / cell));
                t = ((cx + cy) & 1) ? 1.0 : -1.0;
                break;
            }
            case 1:
                t = std::sin(kx * x + ky * y + phase);
                break;
            default:
                t = 0.7 * value_noise(salt, x, y, cell) +
                    0.3 * value_noise(salt ^ 0x5bf0ULL, x, y, cell * 0.37);
        }
        const double g = lattice_value(salt ^ 0xa5a5ULL,
                                       static_cast<std::int64_t>(x),
                                       static_cast<std::int64_t>(y));
        for (int c = 0; c < 3; ++c) {
            const double v = base[c] + amplitude * t + grain * g;
            out[c] = static_cast<std::uint8_t>(
                std::lround(std::clamp(v, 0.0, 255.0)));
        }
    }
};

}  // namespace

Scene gen_scene(const SceneConfig& cfg) {
    validate(cfg);
    Rng rng(cfg.seed);
    const auto [near, far] = cfg.depth_range_m;

    Scene scene;
    scene.sharp = Image::create(cfg.width, cfg.height);
    scene.depth = DepthMap::create(cfg.width, cfg.height, 0.0f);

    // Background plane sits in the far part of the volume.
    const double bg_depth = rng.uniform(near + 0.55 * (far - near), far);
    const SurfaceTexture bg_tex = SurfaceTexture::draw(rng, cfg.texture_scale);
    for (int y = 0; y < cfg.height; ++y) {
        for (int x = 0; x < cfg.width; ++x) {
            bg_tex.shade(x, y, &scene.sharp.at(x, y, 0));
            scene.depth.at(x, y) = static_cast<float>(bg_depth);
        }
    }

    struct Rect {
        int x0, y0, x1, y1;
        double depth;
        SurfaceTexture tex;
    };
    std::vector<Rect> rects;
    rects.reserve(static_cast<std::size_t>(cfg.primitive_count));
    for (int i = 0; i < cfg.primitive_count; ++i) {
        Rect r;
        const int rw = std::max(
            2, static_cast<int>(std::lround(rng.uniform(0.22, 0.55) * cfg.width)));
        const int rh = std::max(
            2, static_cast<int>(std::lround(rng.uniform(0.22, 0.55) * cfg.height)));
        r.x0 = static_cast<int>(rng.uniform_int(
            static_cast<std::uint64_t>(std::max(1, cfg.width - rw))));
        r.y0 = static_cast<int>(rng.uniform_int(
            static_cast<std::uint64_t>(std::max(1, cfg.height - rh))));
        r.x1 = std::min(cfg.width, r.x0 + rw);
        r.y1 = std::min(cfg.height, r.y0 + rh);
        r.depth = rng.uniform(near, far);
        r.tex = SurfaceTexture::draw(rng, cfg.texture_scale);
        rects.push_back(r);
    }
    // Painter's algorithm: far to near, so the nearest surface wins a pixel.
    std::stable_sort(rects.begin(), rects.end(),
                     [](const Rect& a, const Rect& b) { return a.depth > b.depth; });
    for (const Rect& r : rects) {
        for (int y = r.y0; y < r.y1; ++y) {
            for (int x = r.x0; x < r.x1; ++x) {
                r.tex.shade(x, y, &scene.sharp.at(x, y, 0));
                scene.depth.at(x, y) = static_cast<float>(r.depth);
            }
        }
    }
    return scene;
}

// ---------------------------------------------------------------------------
// Thin-lens blur

double coc_radius_px(double object_depth_m, double focus_m,
                     const LensConfig& lens) {
    validate(lens);
    const double f = lens.focal_length_mm / 1000.0;
    if (!(object_depth_m > f) || !(focus_m > f)) {
        throw std::domain_error(
            "object and focus distances must exceed the focal length");
    }
    const double pitch_m = lens.pixel_pitch_mm / 1000.0;
    return (f * f / (2.0 * lens.f_number)) *
           std::abs(object_depth_m - focus_m) /
           (object_depth_m * (focus_m - f)) / pitch_m;
}

namespace {

// Uniform-disc convolution of `field` (single channel) with replicate
// clamping at the borders, written into `out`. Row prefix sums give O(r)
// per pixel.
void disc_convolve(const std::vector<float>& field, int w, int h, double radius,
                   std::vector<float>& out, std::vector<double>& prefix) {
    const int R = static_cast<int>(std::floor(radius));
    std::vector<int> extent(static_cast<std::size_t>(2 * R + 1));
    long long count = 0;
    for (int dy = -R; dy <= R; ++dy) {
        const double rem = radius * radius - static_cast<double>(dy) * dy;
        const int ex = rem >= 0 ? static_cast<int>(std::floor(std::sqrt(rem))) : -1;
        extent[static_cast<std::size_t>(dy + R)] = ex;
        if (ex >= 0) count += 2 * ex + 1;
    }
    const double inv = 1.0 / static_cast<double>(count);

    // prefix[y][x+1] = sum of row y up to column x
    const std::size_t stride = static_cast<std::size_t>(w) + 1;
    prefix.assign(stride * static_cast<std::size_t>(h), 0.0);
    for (int y = 0; y < h; ++y) {
        double acc = 0.0;
        double* row = &prefix[static_cast<std::size_t>(y) * stride];
        const float* src = &field[static_cast<std::size_t>(y) * w];
        for (int x = 0; x < w; ++x) {
            acc += src[x];
            row[x + 1] = acc;
        }
    }

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int dy = -R; dy <= R; ++dy) {
                const int ex = extent[static_cast<std::size_t>(dy + R)];
                if (ex < 0) continue;
                const int sy = std::clamp(y + dy, 0, h - 1);
                const double* row = &prefix[static_cast<std::size_t>(sy) * stride];
                const float* src = &field[static_cast<std::size_t>(sy) * w];
                const int a = x - ex;
                const int b = x + ex;
                const int ca = std::max(a, 0);
                const int cb = std::min(b, w - 1);
                acc += row[cb + 1] - row[ca];
                if (a < 0) acc += static_cast<double>(-a) * src[0];
                if (b > w - 1) acc += static_cast<double>(b - (w - 1)) * src[w - 1];
            }
            out[static_cast<std::size_t>(y) * w + x] = static_cast<float>(acc * inv);
        }
    }
}

// Small-radius path: 3x3 sampled Gaussian with sigma = radius / 2.
void gauss3_convolve(const std::vector<float>& field, int w, int h,
                     double radius, std::vector<float>& out) {
    const double sigma = radius / 2.0;
    double k[3];
    k[0] = std::exp(-1.0 / (2.0 * sigma * sigma));
    k[1] = 1.0;
    k[2] = k[0];
    const double norm = k[0] + k[1] + k[2];
    for (double& v : k) v /= norm;

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int dy = -1; dy <= 1; ++dy) {
                const int sy = std::clamp(y + dy, 0, h - 1);
                for (int dx = -1; dx <= 1; ++dx) {
                    const int sx = std::clamp(x + dx, 0, w - 1);
                    acc += k[dy + 1] * k[dx + 1] *
                           field[static_cast<std::size_t>(sy) * w + sx];
                }
            }
            out[static_cast<std::size_t>(y) * w + x] = static_cast<float>(acc);
        }
    }
}

struct Layer {
    float depth_lo, depth_hi;  // half-open bin [lo, hi); hi == lo for exact
    double radius = 0.0;       // quarter-pixel rounded blur radius
    bool identity = false;
};

constexpr int kMaxLayers = 96;

}  // namespace

Image render_slice(const Image& sharp, const DepthMap& depth, double focus_m,
                   const LensConfig& lens) {
    validate(sharp);
    validate(lens);
    if (sharp.width != depth.width || sharp.height != depth.height) {
        throw ShapeError("sharp image and depth map dimensions differ");
    }
    const int w = sharp.width;
    const int h = sharp.height;
    const std::size_t n = sharp.pixel_count();

    // Collect unique finite depths; fall back to uniform bins when the map is
    // continuous-valued.
    std::vector<float> uniq;
    uniq.reserve(64);
    bool has_nan = false;
    {
        std::vector<float> sorted;
        sorted.reserve(n);
        for (float v : depth.data) {
            if (std::isnan(v)) {
                has_nan = true;
            } else {
                sorted.push_back(v);
            }
        }
        std::sort(sorted.begin(), sorted.end());
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
        uniq = std::move(sorted);
    }

    std::vector<Layer> layers;
    std::vector<int> pixel_layer(n, -1);  // -1 = NaN depth, copied unblurred
    if (static_cast<int>(uniq.size()) <= kMaxLayers) {
        for (float d : uniq) {
            Layer l;
            l.depth_lo = l.depth_hi = d;
            layers.push_back(l);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const float v = depth.data[i];
            if (std::isnan(v)) continue;
            const auto it = std::lower_bound(uniq.begin(), uniq.end(), v);
            pixel_layer[i] = static_cast<int>(it - uniq.begin());
        }
    } else {
        const float lo = uniq.front();
        const float hi = uniq.back();
        const float step = (hi - lo) / kMaxLayers;
        for (int b = 0; b < kMaxLayers; ++b) {
            Layer l;
            l.depth_lo = lo + step * static_cast<float>(b);
            l.depth_hi = lo + step * static_cast<float>(b + 1);
            layers.push_back(l);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const float v = depth.data[i];
            if (std::isnan(v)) continue;
            int b = static_cast<int>((v - lo) / step);
            pixel_layer[i] = std::clamp(b, 0, kMaxLayers - 1);
        }
    }

    for (Layer& l : layers) {
        const double d = 0.5 * (static_cast<double>(l.depth_lo) + l.depth_hi);
        const double r = coc_radius_px(d, focus_m, lens);
        if (r < 0.25) {
            l.identity = true;
        } else {
            l.radius = std::round(r * 4.0) / 4.0;
            l.identity = l.radius < 0.25;
        }
    }

    // Back-to-front premultiplied compositing; layer index descends in depth.
    std::vector<float> acc_rgb(n * 3, 0.0f);
    std::vector<float> acc_a(n, 0.0f);
    std::vector<float> field(n), conv(n);
    std::vector<float> lay_rgb(n * 3), lay_a(n);
    std::vector<double> prefix;

    std::vector<int> order(layers.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    // layers were built in ascending depth; iterate from the far end
    std::reverse(order.begin(), order.end());

    auto composite = [&](const std::vector<float>& rgb, const std::vector<float>& a) {
        for (std::size_t i = 0; i < n; ++i) {
            const float keep = 1.0f - a[i];
            acc_rgb[i * 3 + 0] = rgb[i * 3 + 0] + keep * acc_rgb[i * 3 + 0];
            acc_rgb[i * 3 + 1] = rgb[i * 3 + 1] + keep * acc_rgb[i * 3 + 1];
            acc_rgb[i * 3 + 2] = rgb[i * 3 + 2] + keep * acc_rgb[i * 3 + 2];
            acc_a[i] = a[i] + keep * acc_a[i];
        }
    };

    for (int li : order) {
        const Layer& l = layers[static_cast<std::size_t>(li)];
        bool any = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (pixel_layer[i] == li) {
                any = true;
                break;
            }
        }
        if (!any) continue;

        if (l.identity) {
            for (std::size_t i = 0; i < n; ++i) {
                const bool in = pixel_layer[i] == li;
                lay_a[i] = in ? 1.0f : 0.0f;
                for (int c = 0; c < 3; ++c) {
                    lay_rgb[i * 3 + c] =
                        in ? static_cast<float>(sharp.data[i * 3 + c]) : 0.0f;
                }
            }
        } else {
            // Blur mask and masked color with the same kernel.
            for (std::size_t i = 0; i < n; ++i) {
                field[i] = pixel_layer[i] == li ? 1.0f : 0.0f;
            }
            if (l.radius < 1.0) {
                gauss3_convolve(field, w, h, l.radius, conv);
            } else {
                disc_convolve(field, w, h, l.radius, conv, prefix);
            }
            std::copy(conv.begin(), conv.end(), lay_a.begin());
            for (int c = 0; c < 3; ++c) {
                for (std::size_t i = 0; i < n; ++i) {
                    field[i] = pixel_layer[i] == li
                                   ? static_cast<float>(sharp.data[i * 3 + c])
                                   : 0.0f;
                }
                if (l.radius < 1.0) {
                    gauss3_convolve(field, w, h, l.radius, conv);
                } else {
                    disc_convolve(field, w, h, l.radius, conv, prefix);
                }
                for (std::size_t i = 0; i < n; ++i) lay_rgb[i * 3 + c] = conv[i];
            }
        }
        composite(lay_rgb, lay_a);
    }

    if (has_nan) {
        // Unknown depth renders sharp, composited on top.
        for (std::size_t i = 0; i < n; ++i) {
            const bool in = pixel_layer[i] == -1;
            lay_a[i] = in ? 1.0f : 0.0f;
            for (int c = 0; c < 3; ++c) {
                lay_rgb[i * 3 + c] =
                    in ? static_cast<float>(sharp.data[i * 3 + c]) : 0.0f;
            }
        }
        composite(lay_rgb, lay_a);
    }

    Image out = Image::create(w, h);
    for (std::size_t i = 0; i < n; ++i) {
        const float a = std::max(acc_a[i], 1e-6f);
        for (int c = 0; c < 3; ++c) {
            const float v = acc_rgb[i * 3 + c] / a;
            out.data[i * 3 + c] = static_cast<std::uint8_t>(
                std::lround(std::clamp(v, 0.0f, 255.0f)));
        }
    }
    return out;
}

StackExample render_stack(const Image& sharp, const DepthMap& depth, int n,
                          const LensConfig& lens,
                          std::pair<double, double> focus_range_m) {
    if (n < 1) throw ConfigError("stack size must be >= 1");
    const auto [lo, hi] = focus_range_m;
    if (!(lo > 0) || !(hi >= lo)) {
        throw ConfigError("focus_range must satisfy 0 < min <= max");
    }
    if (n > 1 && !(hi > lo)) {
        throw ConfigError("focus_range must span a nonzero interval for n > 1");
    }

    StackExample ex;
    ex.stack.slices.reserve(static_cast<std::size_t>(n));
    ex.focus_distances_m.reserve(static_cast<std::size_t>(n));
    ex.stack.focus_settings.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double t =
            n == 1 ? 0.5 : static_cast<double>(k) / static_cast<double>(n - 1);
        const double dist = lo + t * (hi - lo);
        ex.stack.slices.push_back(render_slice(sharp, depth, dist, lens));
        ex.focus_distances_m.push_back(static_cast<float>(dist));
        ex.stack.focus_settings.push_back(static_cast<float>(t));
    }
    ex.stack.depth_label = depth;
    return ex;
}

}  // namespace fstack
