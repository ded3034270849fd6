#include "fstack/focus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fstack/errors.hpp"

namespace fstack {

namespace {

std::vector<float> to_luma(const Image& img) {
    std::vector<float> luma(img.pixel_count());
    for (std::size_t i = 0; i < luma.size(); ++i) {
        const std::uint8_t* px = &img.data[i * Image::channels];
        luma[i] = 0.299f * px[0] + 0.587f * px[1] + 0.114f * px[2];
    }
    return luma;
}

inline float sample(const std::vector<float>& f, int w, int h, int x, int y) {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    return f[static_cast<std::size_t>(y) * w + x];
}

FocusMap window_sum(const std::vector<float>& point_measure, int w, int h,
                    int window) {
    const int r = window / 2;
    FocusMap out;
    out.width = w;
    out.height = h;
    out.data.resize(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    acc += sample(point_measure, w, h, x + dx, y + dy);
                }
            }
            out.data[static_cast<std::size_t>(y) * w + x] = static_cast<float>(acc);
        }
    }
    return out;
}

void check_window(int window) {
    if (window < 1 || window % 2 == 0) {
        throw ConfigError("focus-measure window must be odd and >= 1");
    }
}

}  // namespace

FocusMap modified_laplacian(const Image& img, int window) {
    check_window(window);
    validate(img);
    const int w = img.width;
    const int h = img.height;
    const auto luma = to_luma(img);
    std::vector<float> ml(luma.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const float c = 2.0f * sample(luma, w, h, x, y);
            const float mx = std::abs(c - sample(luma, w, h, x - 1, y) -
                                      sample(luma, w, h, x + 1, y));
            const float my = std::abs(c - sample(luma, w, h, x, y - 1) -
                                      sample(luma, w, h, x, y + 1));
            ml[static_cast<std::size_t>(y) * w + x] = mx + my;
        }
    }
    return window_sum(ml, w, h, window);
}

FocusMap tenengrad(const Image& img, int window) {
    check_window(window);
    validate(img);
    const int w = img.width;
    const int h = img.height;
    const auto luma = to_luma(img);
    std::vector<float> g2(luma.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            // 3x3 Sobel, divided by 8 so a unit ramp has unit gradient.
            const float gx =
                (sample(luma, w, h, x + 1, y - 1) + 2.0f * sample(luma, w, h, x + 1, y) +
                 sample(luma, w, h, x + 1, y + 1) - sample(luma, w, h, x - 1, y - 1) -
                 2.0f * sample(luma, w, h, x - 1, y) - sample(luma, w, h, x - 1, y + 1)) /
                8.0f;
            const float gy =
                (sample(luma, w, h, x - 1, y + 1) + 2.0f * sample(luma, w, h, x, y + 1) +
                 sample(luma, w, h, x + 1, y + 1) - sample(luma, w, h, x - 1, y - 1) -
                 2.0f * sample(luma, w, h, x, y - 1) - sample(luma, w, h, x + 1, y - 1)) /
                8.0f;
            g2[static_cast<std::size_t>(y) * w + x] = gx * gx + gy * gy;
        }
    }
    return window_sum(g2, w, h, window);
}

float parabolic_peak_offset(float m0, float m1, float m2) {
    const float denom = m0 - 2.0f * m1 + m2;
    return denom != 0.0f ? 0.5f * (m0 - m2) / denom : 0.0f;
}

DepthMap dff_depth(const FocalStack& stack, FocusMeasure measure,
                   std::span<const float> focus_distances_m,
                   const DffOptions& options) {
    const int n = static_cast<int>(stack.slices.size());
    if (n == 0) throw ShapeError("empty stack");
    if (static_cast<int>(focus_distances_m.size()) != n) {
        throw ShapeError("focus distance count must match slice count");
    }
    const int w = stack.slices.front().width;
    const int h = stack.slices.front().height;

    std::vector<FocusMap> maps;
    maps.reserve(static_cast<std::size_t>(n));
    for (const Image& slice : stack.slices) {
        maps.push_back(measure == FocusMeasure::ModifiedLaplacian
                           ? modified_laplacian(slice, options.window)
                           : tenengrad(slice, options.window));
    }

    float global_max = 0.0f;
    for (const FocusMap& m : maps) {
        for (float v : m.data) global_max = std::max(global_max, v);
    }
    const float floor =
        static_cast<float>(options.contrast_floor_frac) * global_max;

    const float d_lo = *std::min_element(focus_distances_m.begin(),
                                         focus_distances_m.end());
    const float d_hi = *std::max_element(focus_distances_m.begin(),
                                         focus_distances_m.end());

    DepthMap out = DepthMap::create(w, h, std::numeric_limits<float>::quiet_NaN());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int best = 0;
            float best_v = maps[0].at(x, y);
            for (int k = 1; k < n; ++k) {
                const float v = maps[static_cast<std::size_t>(k)].at(x, y);
                if (v > best_v) {
                    best_v = v;
                    best = k;
                }
            }
            if (!(best_v > floor) || global_max <= 0.0f) {
                continue;  // texture-less: below the contrast floor
            }
            float depth;
            if (n < 3 || best == 0 || best == n - 1) {
                depth = focus_distances_m[static_cast<std::size_t>(best)];
            } else {
                const float m0 = maps[static_cast<std::size_t>(best - 1)].at(x, y);
                const float m2 = maps[static_cast<std::size_t>(best + 1)].at(x, y);
                const float delta = parabolic_peak_offset(m0, best_v, m2);
                const float fd = focus_distances_m[static_cast<std::size_t>(best)];
                if (delta >= 0.0f) {
                    depth = fd + delta * (focus_distances_m[static_cast<std::size_t>(best + 1)] - fd);
                } else {
                    depth = fd + delta * (fd - focus_distances_m[static_cast<std::size_t>(best - 1)]);
                }
            }
            out.at(x, y) = std::clamp(depth, d_lo, d_hi);
        }
    }
    return out;
}

}  // namespace fstack
