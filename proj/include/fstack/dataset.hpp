#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fstack/image.hpp"

namespace fstack {

/// PNG codec for 8-bit RGB rasters. Fixed encoder settings keep the bytes
/// reproducible: saving identical pixels twice produces identical files.
void save_png(const Image& img, const std::filesystem::path& path);
Image load_png(const std::filesystem::path& path);

/// Raw depth file: magic "FDPT" (4 bytes), u32 version, u32 width,
/// u32 height, then width*height little-endian f32 values.
void save_depth(const DepthMap& d, const std::filesystem::path& path);
DepthMap load_depth(const std::filesystem::path& path);

/// One focal stack on disk, plus the object-side focus distance of each
/// slice (meters). Settings stay normalized inside FocalStack; the metric
/// distances are what shape-from-focus needs.
struct StackExample {
    FocalStack stack;
    std::vector<float> focus_distances_m;  // empty when unknown
};

/// Directory layout: slice_<k>.png (k = 0..N-1), depth.fdpt, meta.json.
/// Round-trips are bit-exact for slices, focus settings, and labels.
void save_stack(const StackExample& example, const std::filesystem::path& dir);
StackExample load_stack(const std::filesystem::path& dir);

struct ManifestEntry {
    std::string id;        // directory name under the dataset root
    std::string scene_id;  // source scene; augmented variants share it
    int n_slices = 0;
    int width = 0;
    int height = 0;
    int label_width = 0;
    int label_height = 0;
};

struct DatasetManifest {
    int format_version = 1;
    std::vector<ManifestEntry> examples;
};

/// manifest.json at the dataset root. Loading verifies that every referenced
/// path exists and that all examples share slice count and dimensions.
void save_manifest(const DatasetManifest& manifest,
                   const std::filesystem::path& root);
DatasetManifest load_manifest(const std::filesystem::path& root);

/// FNV-1a over every example file in manifest order; used by reports to
/// assert that two runs consumed byte-identical datasets.
std::uint64_t dataset_checksum(const DatasetManifest& manifest,
                               const std::filesystem::path& root);

}  // namespace fstack
