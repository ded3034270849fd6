#pragma once

#include <span>
#include <vector>

#include "fstack/image.hpp"

namespace fstack {

/// Non-negative per-pixel sharpness scores for one image.
struct FocusMap {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    float at(int x, int y) const {
        return data[static_cast<std::size_t>(y) * width + x];
    }
};

enum class FocusMeasure {
    ModifiedLaplacian,
    Tenengrad,
};

/// Sum of absolute second differences in x and y of the luma channel
/// (0.299/0.587/0.114), box-summed over an odd window; replicated borders.
FocusMap modified_laplacian(const Image& img, int window);

/// Squared Sobel gradient magnitude of the luma channel (gradients normalized
/// to unit pixel spacing), box-summed over an odd window; replicated borders.
FocusMap tenengrad(const Image& img, int window);

struct DffOptions {
    int window = 5;
    /// Pixels whose peak measure falls below this fraction of the stack-wide
    /// maximum are reported as NaN (texture-less regions).
    double contrast_floor_frac = 1e-3;
};

/// Vertex offset (in index units, within [-1/2, 1/2] at a strict peak) of the
/// parabola through (k-1, m0), (k, m1), (k+1, m2); zero if it degenerates.
float parabolic_peak_offset(float m0, float m1, float m2);

/// Shape-from-focus: per pixel, the focus measure is evaluated on every
/// slice; the argmax slice is refined by fitting a parabola through the
/// three measures around the peak, and the vertex is mapped to a depth
/// (clamped to the focus-distance range). With fewer than 3 slices the plain
/// argmax depth is returned.
DepthMap dff_depth(const FocalStack& stack, FocusMeasure measure,
                   std::span<const float> focus_distances_m,
                   const DffOptions& options = {});

}  // namespace fstack
