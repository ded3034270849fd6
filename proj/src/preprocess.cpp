#include "fstack/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <vector>

#include "fstack/errors.hpp"
#include "fstack/rng.hpp"

namespace fstack {

void validate(const CameraIntrinsics& cam) {
    if (!(cam.fx > 0) || !(cam.fy > 0)) {
        throw ConfigError("camera focal lengths must be positive");
    }
}

void validate(const RigExtrinsics& rig) {
    const auto& t = rig.translation_m;
    const double norm = std::sqrt(t[0] * t[0] + t[1] * t[1] + t[2] * t[2]);
    if (!(norm < 1.0)) {
        throw ConfigError("rig translation must stay under 1 m");
    }
}

// ---------------------------------------------------------------------------
// Homography

namespace {

// Gaussian elimination with partial pivoting on an n x n system.
void solve_linear(std::vector<double>& a, std::vector<double>& b, int n) {
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r) {
            if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
        }
        if (std::abs(a[pivot * n + col]) < 1e-12) {
            throw std::domain_error("singular system in homography solve");
        }
        if (pivot != col) {
            for (int c = 0; c < n; ++c) std::swap(a[col * n + c], a[pivot * n + c]);
            std::swap(b[col], b[pivot]);
        }
        const double inv = 1.0 / a[col * n + col];
        for (int r = col + 1; r < n; ++r) {
            const double factor = a[r * n + col] * inv;
            if (factor == 0.0) continue;
            for (int c = col; c < n; ++c) a[r * n + c] -= factor * a[col * n + c];
            b[r] -= factor * b[col];
        }
    }
    for (int r = n - 1; r >= 0; --r) {
        double acc = b[r];
        for (int c = r + 1; c < n; ++c) acc -= a[r * n + c] * b[c];
        b[r] = acc / a[r * n + r];
    }
}

}  // namespace

Homography Homography::from_corners(
    const std::array<std::array<double, 2>, 4>& src,
    const std::array<std::array<double, 2>, 4>& dst) {
    std::vector<double> a(64, 0.0);
    std::vector<double> b(8, 0.0);
    for (int i = 0; i < 4; ++i) {
        const double x = src[i][0], y = src[i][1];
        const double u = dst[i][0], v = dst[i][1];
        double* r0 = &a[(2 * i) * 8];
        double* r1 = &a[(2 * i + 1) * 8];
        r0[0] = x; r0[1] = y; r0[2] = 1; r0[6] = -u * x; r0[7] = -u * y;
        r1[3] = x; r1[4] = y; r1[5] = 1; r1[6] = -v * x; r1[7] = -v * y;
        b[2 * i] = u;
        b[2 * i + 1] = v;
    }
    solve_linear(a, b, 8);
    Homography H;
    for (int i = 0; i < 8; ++i) H.h[i] = b[i];
    H.h[8] = 1.0;
    return H;
}

double Homography::determinant() const {
    return h[0] * (h[4] * h[8] - h[5] * h[7]) -
           h[1] * (h[3] * h[8] - h[5] * h[6]) +
           h[2] * (h[3] * h[7] - h[4] * h[6]);
}

Homography Homography::inverse() const {
    const double det = determinant();
    if (std::abs(det) < 1e-14) {
        throw std::domain_error("homography is singular");
    }
    const double inv = 1.0 / det;
    Homography out;
    out.h[0] = (h[4] * h[8] - h[5] * h[7]) * inv;
    out.h[1] = (h[2] * h[7] - h[1] * h[8]) * inv;
    out.h[2] = (h[1] * h[5] - h[2] * h[4]) * inv;
    out.h[3] = (h[5] * h[6] - h[3] * h[8]) * inv;
    out.h[4] = (h[0] * h[8] - h[2] * h[6]) * inv;
    out.h[5] = (h[2] * h[3] - h[0] * h[5]) * inv;
    out.h[6] = (h[3] * h[7] - h[4] * h[6]) * inv;
    out.h[7] = (h[1] * h[6] - h[0] * h[7]) * inv;
    out.h[8] = (h[0] * h[4] - h[1] * h[3]) * inv;
    if (out.h[8] != 0.0) {
        const double s = 1.0 / out.h[8];
        for (double& v : out.h) v *= s;
    }
    return out;
}

std::array<double, 2> Homography::apply(double x, double y) const {
    const double w = h[6] * x + h[7] * y + h[8];
    if (std::abs(w) < 1e-12) {
        return {std::numeric_limits<double>::infinity(),
                std::numeric_limits<double>::infinity()};
    }
    return {(h[0] * x + h[1] * y + h[2]) / w, (h[3] * x + h[4] * y + h[5]) / w};
}

// ---------------------------------------------------------------------------
// Morphology

namespace {

enum class Morph { Min, Max };

DepthMap morph(const DepthMap& d, int radius, Morph op) {
    if (radius < 1) throw ConfigError("morphology radius must be >= 1");
    DepthMap out = DepthMap::create(d.width, d.height,
                                    std::numeric_limits<float>::quiet_NaN());
    for (int y = 0; y < d.height; ++y) {
        const int y0 = std::max(0, y - radius);
        const int y1 = std::min(d.height - 1, y + radius);
        for (int x = 0; x < d.width; ++x) {
            const int x0 = std::max(0, x - radius);
            const int x1 = std::min(d.width - 1, x + radius);
            float best = std::numeric_limits<float>::quiet_NaN();
            for (int sy = y0; sy <= y1; ++sy) {
                for (int sx = x0; sx <= x1; ++sx) {
                    const float v = d.at(sx, sy);
                    if (std::isnan(v)) continue;  // missing, never competes
                    if (std::isnan(best) || (op == Morph::Min ? v < best : v > best)) {
                        best = v;
                    }
                }
            }
            out.at(x, y) = best;
        }
    }
    return out;
}

}  // namespace

DepthMap erode(const DepthMap& d, int radius) {
    return morph(d, radius, Morph::Min);
}

DepthMap dilate(const DepthMap& d, int radius) {
    return morph(d, radius, Morph::Max);
}

// ---------------------------------------------------------------------------
// Gaussian blur

namespace {

// Sampled Gaussian truncated at +-3 sigma, renormalized to unit sum.
std::vector<double> gaussian_kernel(double sigma) {
    if (!(sigma > 0)) throw ConfigError("sigma must be positive");
    const int radius = static_cast<int>(std::floor(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double w = std::exp(-0.5 * (i / sigma) * (i / sigma));
        k[static_cast<std::size_t>(i + radius)] = w;
        sum += w;
    }
    for (double& w : k) w /= sum;
    return k;
}

// One separable pass over a single-channel double field, replicated borders.
void conv_pass(const std::vector<double>& in, int w, int h,
               const std::vector<double>& kernel, bool horizontal,
               std::vector<double>& out) {
    const int radius = static_cast<int>(kernel.size() / 2);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int t = -radius; t <= radius; ++t) {
                int sx = x, sy = y;
                if (horizontal) {
                    sx = std::clamp(x + t, 0, w - 1);
                } else {
                    sy = std::clamp(y + t, 0, h - 1);
                }
                acc += kernel[static_cast<std::size_t>(t + radius)] *
                       in[static_cast<std::size_t>(sy) * w + sx];
            }
            out[static_cast<std::size_t>(y) * w + x] = acc;
        }
    }
}

}  // namespace

DepthMap gaussian_blur(const DepthMap& d, double sigma) {
    const auto kernel = gaussian_kernel(sigma);
    const std::size_t n = d.pixel_count();
    std::vector<double> num(n), den(n), tmp(n);
    for (std::size_t i = 0; i < n; ++i) {
        const float v = d.data[i];
        const bool valid = !std::isnan(v);
        num[i] = valid ? static_cast<double>(v) : 0.0;
        den[i] = valid ? 1.0 : 0.0;
    }
    conv_pass(num, d.width, d.height, kernel, true, tmp);
    conv_pass(tmp, d.width, d.height, kernel, false, num);
    conv_pass(den, d.width, d.height, kernel, true, tmp);
    conv_pass(tmp, d.width, d.height, kernel, false, den);

    DepthMap out = DepthMap::create(d.width, d.height, 0.0f);
    for (std::size_t i = 0; i < n; ++i) {
        out.data[i] = den[i] > 0.0
                          ? static_cast<float>(num[i] / den[i])
                          : std::numeric_limits<float>::quiet_NaN();
    }
    return out;
}

Image gaussian_blur(const Image& img, double sigma) {
    const auto kernel = gaussian_kernel(sigma);
    const std::size_t n = img.pixel_count();
    Image out = Image::create(img.width, img.height);
    std::vector<double> field(n), tmp(n);
    for (int c = 0; c < Image::channels; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            field[i] = img.data[i * Image::channels + c];
        }
        conv_pass(field, img.width, img.height, kernel, true, tmp);
        conv_pass(tmp, img.width, img.height, kernel, false, field);
        for (std::size_t i = 0; i < n; ++i) {
            out.data[i * Image::channels + c] = static_cast<std::uint8_t>(
                std::lround(std::clamp(field[i], 0.0, 255.0)));
        }
    }
    return out;
}

DepthMap clean_depth(const DepthMap& d, int radius, double sigma) {
    return gaussian_blur(dilate(erode(d, radius), radius), sigma);
}

// ---------------------------------------------------------------------------
// Registration

DepthMap register_depth_to_camera(const DepthMap& d,
                                  const CameraIntrinsics& depth_cam,
                                  const CameraIntrinsics& color_cam,
                                  const RigExtrinsics& rig, int out_width,
                                  int out_height) {
    validate(depth_cam);
    validate(color_cam);
    validate(rig);
    DepthMap out = DepthMap::create(out_width, out_height,
                                    std::numeric_limits<float>::quiet_NaN());
    const auto& t = rig.translation_m;
    for (int v = 0; v < d.height; ++v) {
        for (int u = 0; u < d.width; ++u) {
            const float z = d.at(u, v);
            if (std::isnan(z)) continue;
            const double X = (u - depth_cam.cx) / depth_cam.fx * z + t[0];
            const double Y = (v - depth_cam.cy) / depth_cam.fy * z + t[1];
            const double Z = z + t[2];
            if (!(Z > 0)) continue;
            const auto tu = static_cast<int>(
                std::llround(color_cam.fx * X / Z + color_cam.cx));
            const auto tv = static_cast<int>(
                std::llround(color_cam.fy * Y / Z + color_cam.cy));
            if (tu < 0 || tu >= out_width || tv < 0 || tv >= out_height) continue;
            float& slot = out.at(tu, tv);
            if (std::isnan(slot) || Z < slot) slot = static_cast<float>(Z);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Warping

Image apply_homography(const Image& img, const Homography& H, int out_width,
                       int out_height) {
    const Homography inv = H.inverse();
    Image out = Image::create(out_width, out_height);
    for (int y = 0; y < out_height; ++y) {
        for (int x = 0; x < out_width; ++x) {
            const auto [sx, sy] = inv.apply(x, y);
            if (!(sx >= 0.0 && sx <= img.width - 1.0 && sy >= 0.0 &&
                  sy <= img.height - 1.0)) {
                continue;  // black
            }
            const int x0 = static_cast<int>(sx);
            const int y0 = static_cast<int>(sy);
            const int x1 = std::min(x0 + 1, img.width - 1);
            const int y1 = std::min(y0 + 1, img.height - 1);
            const double fx = sx - x0;
            const double fy = sy - y0;
            for (int c = 0; c < Image::channels; ++c) {
                const double top = img.at(x0, y0, c) +
                                   (img.at(x1, y0, c) - img.at(x0, y0, c)) * fx;
                const double bot = img.at(x0, y1, c) +
                                   (img.at(x1, y1, c) - img.at(x0, y1, c)) * fx;
                out.at(x, y, c) = static_cast<std::uint8_t>(
                    std::lround(std::clamp(top + (bot - top) * fy, 0.0, 255.0)));
            }
        }
    }
    return out;
}

DepthMap apply_homography(const DepthMap& d, const Homography& H,
                          int out_width, int out_height) {
    const Homography inv = H.inverse();
    DepthMap out = DepthMap::create(out_width, out_height,
                                    std::numeric_limits<float>::quiet_NaN());
    for (int y = 0; y < out_height; ++y) {
        for (int x = 0; x < out_width; ++x) {
            const auto [sx, sy] = inv.apply(x, y);
            if (!(sx >= 0.0 && sx <= d.width - 1.0 && sy >= 0.0 &&
                  sy <= d.height - 1.0)) {
                continue;  // unknown
            }
            out.at(x, y) = d.at(static_cast<int>(std::lround(sx)),
                                static_cast<int>(std::lround(sy)));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Perturbation

namespace {

bool is_convex(const std::array<std::array<double, 2>, 4>& q) {
    double sign = 0.0;
    for (int i = 0; i < 4; ++i) {
        const auto& a = q[i];
        const auto& b = q[(i + 1) % 4];
        const auto& c = q[(i + 2) % 4];
        const double cross = (b[0] - a[0]) * (c[1] - b[1]) -
                             (b[1] - a[1]) * (c[0] - b[0]);
        if (cross == 0.0) return false;
        if (sign == 0.0) {
            sign = cross;
        } else if ((cross > 0) != (sign > 0)) {
            return false;
        }
    }
    return true;
}

}  // namespace

Homography perturbation_homography(int width, int height, std::uint64_t seed,
                                   double magnitude) {
    if (magnitude < 0.0 || magnitude > 0.1) {
        throw ConfigError("perturbation magnitude must lie in [0, 0.1]");
    }
    if (magnitude == 0.0) return Homography::identity();

    const std::array<std::array<double, 2>, 4> src = {{
        {0.0, 0.0},
        {static_cast<double>(width - 1), 0.0},
        {static_cast<double>(width - 1), static_cast<double>(height - 1)},
        {0.0, static_cast<double>(height - 1)},
    }};
    const double bound = magnitude * width;
    Rng rng(seed);
    std::array<std::array<double, 2>, 4> dst;
    do {
        for (int i = 0; i < 4; ++i) {
            dst[i][0] = src[i][0] + rng.uniform(-bound, bound);
            dst[i][1] = src[i][1] + rng.uniform(-bound, bound);
        }
    } while (!is_convex(dst));
    return Homography::from_corners(src, dst);
}

FocalStack perturb_example(const FocalStack& stack, std::uint64_t seed,
                           double magnitude) {
    validate(stack);
    const int w = stack.slices.front().width;
    const int h = stack.slices.front().height;
    const Homography H = perturbation_homography(w, h, seed, magnitude);

    FocalStack out;
    out.focus_settings = stack.focus_settings;
    out.slices.reserve(stack.slices.size());
    for (const Image& slice : stack.slices) {
        out.slices.push_back(apply_homography(slice, H, w, h));
    }
    out.depth_label = apply_homography(stack.depth_label, H,
                                       stack.depth_label.width,
                                       stack.depth_label.height);
    return out;
}

// ---------------------------------------------------------------------------
// Crop / resize

namespace {

void check_roi(const Roi& roi, int width, int height) {
    if (roi.width <= 0 || roi.height <= 0 || roi.x < 0 || roi.y < 0 ||
        roi.x + roi.width > width || roi.y + roi.height > height) {
        throw std::out_of_range("crop ROI is outside the source raster");
    }
}

}  // namespace

Image crop_resize(const Image& img, const Roi& roi, int out_width,
                  int out_height) {
    check_roi(roi, img.width, img.height);
    if (out_width <= 0 || out_height <= 0) {
        throw ShapeError("output dimensions must be positive");
    }
    Image out = Image::create(out_width, out_height);
    const double scale_x = static_cast<double>(roi.width) / out_width;
    const double scale_y = static_cast<double>(roi.height) / out_height;
    const double max_x = roi.x + roi.width - 1.0;
    const double max_y = roi.y + roi.height - 1.0;
    for (int y = 0; y < out_height; ++y) {
        const double sy =
            std::clamp(roi.y + (y + 0.5) * scale_y - 0.5, static_cast<double>(roi.y), max_y);
        const int y0 = static_cast<int>(sy);
        const int y1 = std::min(y0 + 1, roi.y + roi.height - 1);
        const double fy = sy - y0;
        for (int x = 0; x < out_width; ++x) {
            const double sx = std::clamp(roi.x + (x + 0.5) * scale_x - 0.5,
                                         static_cast<double>(roi.x), max_x);
            const int x0 = static_cast<int>(sx);
            const int x1 = std::min(x0 + 1, roi.x + roi.width - 1);
            const double fx = sx - x0;
            for (int c = 0; c < Image::channels; ++c) {
                const double top = img.at(x0, y0, c) +
                                   (img.at(x1, y0, c) - img.at(x0, y0, c)) * fx;
                const double bot = img.at(x0, y1, c) +
                                   (img.at(x1, y1, c) - img.at(x0, y1, c)) * fx;
                out.at(x, y, c) = static_cast<std::uint8_t>(
                    std::lround(std::clamp(top + (bot - top) * fy, 0.0, 255.0)));
            }
        }
    }
    return out;
}

DepthMap crop_resize(const DepthMap& d, const Roi& roi, int out_width,
                     int out_height) {
    check_roi(roi, d.width, d.height);
    if (out_width <= 0 || out_height <= 0) {
        throw ShapeError("output dimensions must be positive");
    }
    DepthMap out = DepthMap::create(out_width, out_height, 0.0f);
    const double scale_x = static_cast<double>(roi.width) / out_width;
    const double scale_y = static_cast<double>(roi.height) / out_height;
    for (int y = 0; y < out_height; ++y) {
        const int sy = std::clamp(
            static_cast<int>(std::lround(roi.y + (y + 0.5) * scale_y - 0.5)),
            roi.y, roi.y + roi.height - 1);
        for (int x = 0; x < out_width; ++x) {
            const int sx = std::clamp(
                static_cast<int>(std::lround(roi.x + (x + 0.5) * scale_x - 0.5)),
                roi.x, roi.x + roi.width - 1);
            out.at(x, y) = d.at(sx, sy);
        }
    }
    return out;
}

DepthMap fill_unknown(const DepthMap& d) {
    const std::size_t n = d.pixel_count();
    DepthMap out = d;
    std::deque<std::size_t> frontier;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isnan(out.data[i])) frontier.push_back(i);
    }
    if (frontier.empty()) {
        throw NumericError("cannot fill a depth map with no valid pixels");
    }
    if (frontier.size() == n) return out;
    // Multi-source BFS; first arrival (row-major tie order) wins.
    const int w = out.width;
    const int h = out.height;
    while (!frontier.empty()) {
        const std::size_t i = frontier.front();
        frontier.pop_front();
        const int x = static_cast<int>(i % static_cast<std::size_t>(w));
        const int y = static_cast<int>(i / static_cast<std::size_t>(w));
        const float v = out.data[i];
        const int nx[4] = {x - 1, x + 1, x, x};
        const int ny[4] = {y, y, y - 1, y + 1};
        for (int k = 0; k < 4; ++k) {
            if (nx[k] < 0 || nx[k] >= w || ny[k] < 0 || ny[k] >= h) continue;
            const std::size_t j =
                static_cast<std::size_t>(ny[k]) * w + static_cast<std::size_t>(nx[k]);
            if (std::isnan(out.data[j])) {
                out.data[j] = v;
                frontier.push_back(j);
            }
        }
    }
    return out;
}

}  // namespace fstack
