#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fstack/dataset.hpp"
#include "fstack/focus.hpp"
#include "fstack/lens.hpp"
#include "fstack/train.hpp"

namespace fstack::bench {

// ---------------------------------------------------------------------------
// Dataset generation

struct DatasetGenConfig {
    std::uint64_t seed = 0;
    int count = 500;           // unique scenes
    int augment_factor = 0;    // extra perturbed copies per scene
    double perturb_magnitude = 0.05;
    int n_slices = 8;
    int slice_size = 64;
    int label_size = 16;
    std::pair<double, double> focus_range_m = {0.4, 4.0};
    LensConfig lens;
    SceneConfig scene;  // width/height/seed are managed per scene
    bool clean_labels = false;  // erode/dilate/blur on labels (noisy sensors)
    int clean_radius = 1;
    double clean_sigma = 1.5;
};

void validate(const DatasetGenConfig& cfg);

/// Renders `count` scenes, perturbs each augment_factor times (originals
/// retained), crops/resizes to the training sizes, and writes the dataset
/// layout. Deterministic in cfg.seed: equal seeds give byte-identical trees.
DatasetManifest generate_dataset(const DatasetGenConfig& cfg,
                                 const std::filesystem::path& out_dir);

/// Scene-grouped split: every augmented variant of a scene lands on the same
/// side, so perturbed copies of a test scene can never leak into training.
struct SplitIds {
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
};

SplitIds split_dataset(const DatasetManifest& manifest, double fraction,
                       std::uint64_t seed);

// ---------------------------------------------------------------------------
// Experiments

enum class Mode { Single, Stack, Classic };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& name);

struct ExperimentConfig {
    Mode mode = Mode::Stack;
    std::filesystem::path dataset_dir;
    nn::TrainConfig train;
    int single_slice_index = -1;  // -1 selects the last slice (N-1)
    FocusMeasure classic_measure = FocusMeasure::ModifiedLaplacian;
    std::array<int, 6> conv_channels = {16, 16, 32, 32, 64, 64};
    int hidden = 256;
    // Labels train in depth scaled to 0..255 over [near, far]; heat maps use
    // the same bounds so truth and prediction share one color scale.
    double label_near_m = 0.4;
    double label_far_m = 4.0;
    int figure_count = 8;
    std::filesystem::path out_dir;  // empty: nothing is written
};

struct SplitMetrics {
    double mse = 0.0;  // per-pixel, in scaled label units
    double mae = 0.0;
};

struct ExampleScore {
    std::string id;
    std::string split;  // "train" | "test"
    double mse = 0.0;
    double mae = 0.0;
    double nan_fraction = 0.0;  // classic mode: texture-less pixels filled
};

struct FigureExample {
    std::string id;
    std::vector<float> prediction;  // label units, label-resolution
};

struct EvalReport {
    std::string mode;
    std::uint64_t seed = 0;
    std::uint64_t dataset_checksum = 0;
    SplitMetrics train;
    SplitMetrics test;
    std::vector<double> loss_history;
    std::vector<ExampleScore> examples;
    std::vector<FigureExample> figures;
    double label_near_m = 0.4;
    double label_far_m = 4.0;
    int label_width = 0;
    int label_height = 0;
    nlohmann::json config_echo;
};

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);
void save_report(const EvalReport& report, const std::filesystem::path& out_dir);
EvalReport load_report(const std::filesystem::path& json_path);

/// Runs one experiment: assembles input tensors per mode (single = one slice,
/// stack = all N slices as 3N channels, classic = shape-from-focus with no
/// training), evaluates per-pixel MSE/MAE on both splits, and writes
/// report.json, loss_history.csv, heat-map figures, and the checkpoint when
/// out_dir is set.
EvalReport run_experiment(const ExperimentConfig& cfg);

/// Scores a saved checkpoint on a dataset without training. The checkpoint's
/// input channels must match the mode (3 for single, 3N for stack). Expects
/// checkpoints trained by run_experiment (unit-encoded regression head).
EvalReport evaluate_checkpoint(const ExperimentConfig& cfg,
                               const std::filesystem::path& checkpoint_path);

struct CompareSeedResult {
    std::uint64_t seed = 0;
    SplitMetrics single_test;
    SplitMetrics stack_test;
    bool stack_beats_single = false;
};

struct CompareResult {
    std::vector<CompareSeedResult> seeds;
    double median_single_mse = 0.0;
    double median_stack_mse = 0.0;
    double median_single_mae = 0.0;
    double median_stack_mae = 0.0;
    std::uint64_t dataset_checksum = 0;
};

/// Runs single and stack modes for every seed on one dataset and writes a
/// side-by-side summary (JSON, CSV, markdown). The configs must agree on
/// everything except the input mode.
CompareResult compare_modes(const ExperimentConfig& cfg_single,
                            const ExperimentConfig& cfg_stack,
                            const std::vector<std::uint64_t>& seeds,
                            const std::filesystem::path& out_dir);

/// Emits one PNG row per figure example: input slice, ground truth, and the
/// prediction of each report, all on the shared metric color scale. Reports
/// must come from the same dataset.
std::vector<std::filesystem::path> render_report_figures(
    const std::vector<EvalReport>& reports,
    const std::filesystem::path& dataset_dir,
    const std::filesystem::path& out_dir);

// ---------------------------------------------------------------------------
// Config file support (one JSON file can carry every section)

DatasetGenConfig dataset_gen_from_json(const nlohmann::json& j);
nlohmann::json dataset_gen_to_json(const DatasetGenConfig& cfg);
ExperimentConfig experiment_from_json(const nlohmann::json& j);
nlohmann::json experiment_to_json(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Desk-scale benchmark: 500 scenes, 8 slices, 64x64 images, 16x16 labels,
// 30 epochs of batch-32 SGD, sized to finish in well under an hour on one
// desktop core. Augmented once per scene (originals kept) so an epoch sees
// enough mini-batches for SGD to move past the label mean.

DatasetGenConfig desk_benchmark_dataset(std::uint64_t seed = 5);
ExperimentConfig desk_benchmark_experiment(Mode mode,
                                           const std::filesystem::path& dataset);

}  // namespace fstack::bench
