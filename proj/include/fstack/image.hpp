#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace fstack {

/// 8-bit color raster, row-major, RGB interleaved.
struct Image {
    static constexpr int channels = 3;

    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;  // size == width * height * 3

    static Image create(int width, int height);

    std::uint8_t& at(int x, int y, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at(int x, int y, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::size_t pixel_count() const {
        return static_cast<std::size_t>(width) * height;
    }
};

/// Per-pixel metric depth in meters (32-bit float). Unknown depth is NaN so
/// that arithmetic cannot silently absorb missing pixels.
struct DepthMap {
    int width = 0;
    int height = 0;
    std::vector<float> data;  // size == width * height

    static DepthMap create(int width, int height, float fill);

    float& at(int x, int y) {
        return data[static_cast<std::size_t>(y) * width + x];
    }
    float at(int x, int y) const {
        return data[static_cast<std::size_t>(y) * width + x];
    }
    std::size_t pixel_count() const {
        return static_cast<std::size_t>(width) * height;
    }
};

/// N images of one static scene captured at increasing lens focus settings,
/// plus the depth label. Settings are normalized to 0..1.
struct FocalStack {
    std::vector<Image> slices;
    std::vector<float> focus_settings;  // strictly increasing, size == slices
    DepthMap depth_label;
};

/// Throws ShapeError/FormatError when the type invariants do not hold.
void validate(const Image& img);
void validate(const DepthMap& d);       // finite values must lie in (0, 100)
void validate(const FocalStack& stack);

/// Maps metric depth onto a 5-stop color ramp (blue, cyan, green, yellow,
/// red): depth == near_m renders pure blue, depth == far_m pure red, values
/// clamped in between. Unknown (NaN) pixels render black.
/// Throws ConfigError when near_m >= far_m.
Image depth_to_heatmap(const DepthMap& d, float near_m, float far_m);

/// Ramp parameter for a depth value, clamped to [0, 1]. Exposed so tests can
/// check monotonicity without decoding colors.
float heatmap_ramp_t(float depth_m, float near_m, float far_m);

/// Row-major flattening; a 24x24 map yields a length-576 vector.
std::vector<float> flatten_depth(const DepthMap& d);

/// Inverse of flatten_depth for a known shape.
DepthMap unflatten_depth(std::span<const float> values, int width, int height);

}  // namespace fstack
