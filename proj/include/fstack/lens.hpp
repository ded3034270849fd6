#pragma once

#include <cstdint>
#include <utility>

#include "fstack/dataset.hpp"
#include "fstack/image.hpp"

namespace fstack {

/// Thin-lens camera model for synthetic defocus. pixel_pitch is the sensor
/// sampling interval, so blur radii come out in pixels. The default is a
/// fast lens: depth of field grows quadratically with distance, and a slow
/// aperture would render the far half of the working volume sharp in every
/// slice, leaving focus uninformative there.
struct LensConfig {
    double focal_length_mm = 50.0;
    double f_number = 1.2;
    double pixel_pitch_mm = 0.15;
    // Lens-to-sensor travel of the focus mechanism; min must exceed the focal
    // length or no real image forms.
    std::pair<double, double> sensor_to_lens_range_mm = {50.5, 57.5};
};

void validate(const LensConfig& lens);

/// Procedural scene: textured fronto-parallel rectangles over a textured
/// background plane, so depth discontinuities exist.
struct SceneConfig {
    std::uint64_t seed = 0;
    int width = 64;
    int height = 64;
    std::pair<double, double> depth_range_m = {0.4, 4.0};
    int primitive_count = 6;
    double texture_scale = 1.0;  // texture contrast multiplier
};

void validate(const SceneConfig& cfg);

struct Scene {
    Image sharp;     // all-in-focus rendering
    DepthMap depth;  // exact per-pixel depth, dense
};

/// Deterministic in cfg.seed. Every depth value lies inside depth_range_m.
Scene gen_scene(const SceneConfig& cfg);

/// Blur-circle radius in pixels for an object at object_depth_m when the
/// lens focuses at focus_m:
///   r = (f^2 / (2 N)) * |d - s| / (d * (s - f)) / pitch
/// with f, d, s in meters and pitch in meters per pixel. Zero exactly on the
/// focus plane, monotone in |d - s| on either side. Throws std::domain_error
/// for objects at or behind the lens focal point.
double coc_radius_px(double object_depth_m, double focus_m,
                     const LensConfig& lens);

/// Renders one slice: each depth layer is blurred with a normalized disc of
/// its blur-circle radius (Gaussian of sigma = r/2 below one pixel; radii
/// under 0.25 px leave pixels untouched) and composited back-to-front with
/// alpha accumulation. Pixels with NaN depth are copied unblurred.
Image render_slice(const Image& sharp, const DepthMap& depth, double focus_m,
                   const LensConfig& lens);

/// N slices at focus distances equally spaced across focus_range_m
/// (midpoint when N == 1). focus_settings normalized to 0..1; the label is
/// the exact depth map.
StackExample render_stack(const Image& sharp, const DepthMap& depth, int n,
                          const LensConfig& lens,
                          std::pair<double, double> focus_range_m);

}  // namespace fstack
