#pragma once

#include <array>
#include <cstdint>

#include "fstack/image.hpp"

namespace fstack {

/// Pinhole camera intrinsics in pixels.
struct CameraIntrinsics {
    double fx = 0, fy = 0;
    double cx = 0, cy = 0;
};

void validate(const CameraIntrinsics& cam);

/// Rigid offset from the depth sensor to the color camera. Rotation is not
/// modeled; the rig mounts both sensors on one bracket.
struct RigExtrinsics {
    std::array<double, 3> translation_m = {0, 0, 0};
};

void validate(const RigExtrinsics& rig);

/// 3x3 projective transform, row-major, normalized so h[8] == 1 when the
/// bottom-right entry is nonzero.
struct Homography {
    std::array<double, 9> h = {1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Homography identity() { return {}; }
    /// Exact map of four source corners onto four destination corners.
    static Homography from_corners(const std::array<std::array<double, 2>, 4>& src,
                                   const std::array<std::array<double, 2>, 4>& dst);
    Homography inverse() const;  // throws std::domain_error when singular
    std::array<double, 2> apply(double x, double y) const;
    double determinant() const;
};

/// Grayscale morphology over a (2r+1)^2 window. NaN pixels are treated as
/// missing: both operators take the min/max over the valid values in the
/// window, and produce NaN only when the window holds no valid pixel, so
/// holes shrink wherever valid data is nearby.
DepthMap erode(const DepthMap& d, int radius);
DepthMap dilate(const DepthMap& d, int radius);

/// Separable convolution with a sampled Gaussian renormalized after
/// truncation at +-3 sigma; borders replicate. NaN pixels are excluded with
/// weight renormalization (NaN only survives where a whole neighborhood is
/// unknown).
DepthMap gaussian_blur(const DepthMap& d, double sigma);
Image gaussian_blur(const Image& img, double sigma);

/// The depth-cleaning chain used on raw sensor labels:
/// erode(radius) -> dilate(radius) -> gaussian_blur(sigma).
DepthMap clean_depth(const DepthMap& d, int radius = 1, double sigma = 1.5);

/// Back-projects every valid depth pixel with depth_cam, translates by the
/// rig offset, re-projects with color_cam. Z-buffering keeps the nearest
/// point per target pixel; uncovered target pixels are NaN.
DepthMap register_depth_to_camera(const DepthMap& d,
                                  const CameraIntrinsics& depth_cam,
                                  const CameraIntrinsics& color_cam,
                                  const RigExtrinsics& rig, int out_width,
                                  int out_height);

/// Inverse-mapped warp. Images sample bilinearly with black outside the
/// source; depth labels sample nearest-neighbor with NaN outside so depths
/// never blend across object edges.
Image apply_homography(const Image& img, const Homography& H, int out_width,
                       int out_height);
DepthMap apply_homography(const DepthMap& d, const Homography& H,
                          int out_width, int out_height);

/// Draws one random homography by displacing the four image corners
/// independently by uniform offsets bounded by magnitude * width, then warps
/// every slice and the depth label with it. Non-convex corner draws are
/// redrawn internally. magnitude must lie in [0, 0.1]; 0 is the identity.
FocalStack perturb_example(const FocalStack& stack, std::uint64_t seed,
                           double magnitude);

/// The homography a given perturbation seed draws; exposed so callers can
/// audit corner displacements.
Homography perturbation_homography(int width, int height, std::uint64_t seed,
                                   double magnitude);

struct Roi {
    int x = 0, y = 0;
    int width = 0, height = 0;
};

/// Crop then resample: bilinear for images, nearest-neighbor for depth
/// (labels must not blend across depth edges). Half-pixel-center mapping, so
/// a full-frame ROI at unchanged size is the identity.
Image crop_resize(const Image& img, const Roi& roi, int out_width,
                  int out_height);
DepthMap crop_resize(const DepthMap& d, const Roi& roi, int out_width,
                     int out_height);

/// Replaces every NaN with the nearest valid value (ties broken by scan
/// order); used before depth maps feed training, which requires finite
/// labels. No-op on NaN-free maps; throws NumericError if nothing is valid.
DepthMap fill_unknown(const DepthMap& d);

}  // namespace fstack
