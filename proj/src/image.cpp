#include "fstack/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "fstack/errors.hpp"

namespace fstack {

Image Image::create(int width, int height) {
    if (width <= 0 || height <= 0) {
        throw ShapeError("Image dimensions must be positive");
    }
    Image img;
    img.width = width;
    img.height = height;
    img.data.assign(static_cast<std::size_t>(width) * height * channels, 0);
    return img;
}

DepthMap DepthMap::create(int width, int height, float fill) {
    if (width <= 0 || height <= 0) {
        throw ShapeError("DepthMap dimensions must be positive");
    }
    DepthMap d;
    d.width = width;
    d.height = height;
    d.data.assign(static_cast<std::size_t>(width) * height, fill);
    return d;
}

void validate(const Image& img) {
    if (img.width <= 0 || img.height <= 0) {
        throw ShapeError("Image dimensions must be positive");
    }
    if (img.data.size() != img.pixel_count() * Image::channels) {
        throw ShapeError("Image buffer size does not match width*height*3");
    }
}

void validate(const DepthMap& d) {
    if (d.width <= 0 || d.height <= 0) {
        throw ShapeError("DepthMap dimensions must be positive");
    }
    if (d.data.size() != d.pixel_count()) {
        throw ShapeError("DepthMap buffer size does not match width*height");
    }
    for (float v : d.data) {
        if (std::isnan(v)) continue;  // NaN marks unknown depth
        if (!(v > 0.0f && v < 100.0f)) {
            throw FormatError("depth value outside the (0, 100) m sanity bound");
        }
    }
}

void validate(const FocalStack& stack) {
    if (stack.slices.empty()) {
        throw ShapeError("FocalStack needs at least one slice");
    }
    if (stack.focus_settings.size() != stack.slices.size()) {
        throw ShapeError("focus_settings length must equal slice count");
    }
    const int w = stack.slices.front().width;
    const int h = stack.slices.front().height;
    for (const Image& s : stack.slices) {
        validate(s);
        if (s.width != w || s.height != h) {
            throw ShapeError("all slices must share dimensions");
        }
    }
    for (std::size_t i = 1; i < stack.focus_settings.size(); ++i) {
        if (!(stack.focus_settings[i] > stack.focus_settings[i - 1])) {
            throw FormatError("focus_settings must be strictly increasing");
        }
    }
    validate(stack.depth_label);
}

float heatmap_ramp_t(float depth_m, float near_m, float far_m) {
    float t = (depth_m - near_m) / (far_m - near_m);
    return std::clamp(t, 0.0f, 1.0f);
}

namespace {

// Five evenly spaced stops; only the endpoints are fixed by the sensor
// convention (near = blue, far = red).
constexpr std::uint8_t kRamp[5][3] = {
    {0, 0, 255},    // blue
    {0, 255, 255},  // cyan
    {0, 255, 0},    // green
    {255, 255, 0},  // yellow
    {255, 0, 0},    // red
};

}  // namespace

Image depth_to_heatmap(const DepthMap& d, float near_m, float far_m) {
    if (!(near_m < far_m)) {
        throw ConfigError("heatmap range requires near < far");
    }
    Image img = Image::create(d.width, d.height);
    for (std::size_t i = 0; i < d.data.size(); ++i) {
        const float v = d.data[i];
        std::uint8_t* px = &img.data[i * Image::channels];
        if (std::isnan(v)) {
            px[0] = px[1] = px[2] = 0;
            continue;
        }
        const float t = heatmap_ramp_t(v, near_m, far_m);
        const float pos = t * 4.0f;
        const int stop = std::min(3, static_cast<int>(pos));
        const float u = pos - static_cast<float>(stop);
        for (int c = 0; c < 3; ++c) {
            const float a = kRamp[stop][c];
            const float b = kRamp[stop + 1][c];
            px[c] = static_cast<std::uint8_t>(std::lround(a + (b - a) * u));
        }
    }
    return img;
}

std::vector<float> flatten_depth(const DepthMap& d) {
    return d.data;  // storage is already row-major
}

DepthMap unflatten_depth(std::span<const float> values, int width, int height) {
    if (static_cast<std::size_t>(width) * height != values.size()) {
        throw ShapeError("value count does not match target dimensions");
    }
    DepthMap d = DepthMap::create(width, height, 0.0f);
    std::copy(values.begin(), values.end(), d.data.begin());
    return d;
}

}  // namespace fstack
