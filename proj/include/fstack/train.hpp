#pragma once

#include <filesystem>
#include <vector>

#include "fstack/net.hpp"

namespace fstack::nn {

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 32;
    int epochs = 30;
    double split_fraction = 0.85;
    std::uint64_t seed = 0;
    // Worker threads for per-example forward/backward inside a batch
    // (0 = hardware concurrency). Gradients reduce in example order, so the
    // result is bit-identical for any thread count.
    int threads = 0;
};

void validate(const TrainConfig& cfg);

/// One training example: the input as 8-bit planar [C,H,W] values
/// (normalized to [0,1] when assembled into a tensor) and the flattened
/// label, already in training units.
struct Example {
    std::vector<std::uint8_t> input;
    std::vector<float> label;
};

struct Split {
    std::vector<int> train_indices;
    std::vector<int> test_indices;
};

/// Shuffled example-level split, deterministic in seed. Partition is exact
/// to rounding of fraction * count.
Split random_split(int count, double fraction, std::uint64_t seed);

/// Input tensor for an example: u8 planes scaled to [0,1].
Tensor assemble_input(const Example& ex, const ModelSpec& spec);

struct TrainResult {
    Model model;
    std::vector<double> loss_history;  // mean training loss per epoch
    Split split;
};

/// Mini-batch SGD on MSE. Splits by cfg.split_fraction/cfg.seed unless an
/// explicit split is given; shuffles the training order each epoch; gradient
/// accumulation runs in example order so results are bit-reproducible.
/// Throws NumericError when the loss exceeds 1e3 x the initial loss for 3
/// consecutive epochs (lower the learning rate).
TrainResult train(const std::vector<Example>& examples, const ModelSpec& spec,
                  const TrainConfig& cfg, const Split* split = nullptr);

std::vector<float> predict(const Model& model, const Example& ex);

/// Checkpoint: magic "FDNN", u32 version, u64 spec-JSON length, the spec as
/// JSON, then every parameter tensor in layer order as little-endian f32.
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace fstack::nn
