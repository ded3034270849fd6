#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "fstack/bench.hpp"
#include "fstack/errors.hpp"

using namespace fstack;
using namespace fstack::bench;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* tag) {
    const fs::path dir = fs::temp_directory_path() / "fstack_bench" / tag;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

DatasetGenConfig tiny_gen(std::uint64_t seed) {
    DatasetGenConfig cfg;
    cfg.seed = seed;
    cfg.count = 6;
    cfg.augment_factor = 1;
    cfg.n_slices = 4;
    cfg.slice_size = 16;
    cfg.label_size = 8;
    cfg.scene.primitive_count = 3;
    return cfg;
}

ExperimentConfig tiny_experiment(const fs::path& dataset, Mode mode) {
    ExperimentConfig cfg;
    cfg.mode = mode;
    cfg.dataset_dir = dataset;
    cfg.train.epochs = 2;
    cfg.train.batch_size = 4;
    cfg.train.learning_rate = 1e-4;
    cfg.train.seed = 3;
    cfg.conv_channels = {4, 4, 4, 4, 4, 4};
    cfg.hidden = 16;
    cfg.figure_count = 3;
    return cfg;
}

void check_report_consistency(const EvalReport& r) {
    double train_mse = 0, train_mae = 0, test_mse = 0, test_mae = 0;
    std::size_t n_train = 0, n_test = 0;
    for (const ExampleScore& e : r.examples) {
        if (e.split == "test") {
            test_mse += e.mse;
            test_mae += e.mae;
            ++n_test;
        } else {
            train_mse += e.mse;
            train_mae += e.mae;
            ++n_train;
        }
    }
    REQUIRE(n_train > 0);
    REQUIRE(n_test > 0);
    CHECK(r.train.mse ==
          doctest::Approx(train_mse / static_cast<double>(n_train)).epsilon(1e-6));
    CHECK(r.train.mae ==
          doctest::Approx(train_mae / static_cast<double>(n_train)).epsilon(1e-6));
    CHECK(r.test.mse ==
          doctest::Approx(test_mse / static_cast<double>(n_test)).epsilon(1e-6));
    CHECK(r.test.mae ==
          doctest::Approx(test_mae / static_cast<double>(n_test)).epsilon(1e-6));
    // Jensen: the mean absolute error squared cannot exceed the mean square.
    CHECK(r.train.mae * r.train.mae <= r.train.mse + 1e-9);
    CHECK(r.test.mae * r.test.mae <= r.test.mse + 1e-9);
}

}  // namespace

TEST_CASE("split_dataset groups every variant of a scene on one side") {
    DatasetManifest m;
    for (int s = 0; s < 100; ++s) {
        for (int v = 0; v < 2; ++v) {
            ManifestEntry e;
            e.id = "s" + std::to_string(s) + "_v" + std::to_string(v);
            e.scene_id = "s" + std::to_string(s);
            e.n_slices = 4;
            e.width = e.height = 16;
            e.label_width = e.label_height = 8;
            m.examples.push_back(e);
        }
    }
    const SplitIds split = split_dataset(m, 0.85, 4);
    CHECK(split.train_ids.size() == 170);  // 85 scenes x 2 variants
    CHECK(split.test_ids.size() == 30);

    std::set<std::string> test_scenes;
    for (const std::string& id : split.test_ids) {
        test_scenes.insert(id.substr(0, id.find("_v")));
    }
    for (const std::string& id : split.train_ids) {
        CHECK(test_scenes.count(id.substr(0, id.find("_v"))) == 0);
    }

    std::set<std::string> all(split.train_ids.begin(), split.train_ids.end());
    all.insert(split.test_ids.begin(), split.test_ids.end());
    CHECK(all.size() == 200);

    CHECK_THROWS_AS(split_dataset(DatasetManifest{}, 0.85, 1), ConfigError);
    CHECK_THROWS_AS(split_dataset(m, 1.2, 1), ConfigError);
}

TEST_CASE("generate_dataset writes a loadable, deterministic tree") {
    const fs::path dir_a = temp_dir("gen_a");
    const fs::path dir_b = temp_dir("gen_b");
    const DatasetGenConfig cfg = tiny_gen(17);
    const DatasetManifest ma = generate_dataset(cfg, dir_a);
    CHECK(ma.examples.size() == 12);  // 6 scenes x (1 + 1 augmented)

    const DatasetManifest loaded = load_manifest(dir_a);
    CHECK(loaded.examples.size() == 12);
    const StackExample ex = load_stack(dir_a / loaded.examples[0].id);
    CHECK(ex.stack.slices.size() == 4);
    CHECK(ex.stack.slices[0].width == 16);
    CHECK(ex.stack.depth_label.width == 8);
    CHECK(ex.focus_distances_m.size() == 4);
    for (float v : ex.stack.depth_label.data) CHECK(!std::isnan(v));

    // Same seed: byte-identical; different seed: different bytes.
    const DatasetManifest mb = generate_dataset(cfg, dir_b);
    CHECK(dataset_checksum(ma, dir_a) == dataset_checksum(mb, dir_b));
    const fs::path dir_c = temp_dir("gen_c");
    DatasetGenConfig other = cfg;
    other.seed = 18;
    const DatasetManifest mc = generate_dataset(other, dir_c);
    CHECK(dataset_checksum(ma, dir_a) != dataset_checksum(mc, dir_c));

    DatasetGenConfig bad = cfg;
    bad.count = 0;
    CHECK_THROWS_AS(generate_dataset(bad, dir_a), ConfigError);
}

TEST_CASE("classic experiments produce consistent reports") {
    const fs::path ds = temp_dir("exp_classic");
    generate_dataset(tiny_gen(23), ds);
    ExperimentConfig cfg = tiny_experiment(ds, Mode::Classic);
    cfg.out_dir = ds / "out";
    const EvalReport report = run_experiment(cfg);

    CHECK(report.mode == "classic");
    CHECK(report.loss_history.empty());
    CHECK(report.examples.size() == 12);
    check_report_consistency(report);
    CHECK(fs::exists(cfg.out_dir / "report.json"));
    CHECK(fs::exists(cfg.out_dir / "loss_history.csv"));
    CHECK(!report.figures.empty());
    for (const FigureExample& f : report.figures) {
        CHECK(fs::exists(cfg.out_dir / "figures" / ("row_" + f.id + ".png")));
    }

    // Round-trip through JSON preserves the scores.
    const EvalReport back = load_report(cfg.out_dir / "report.json");
    CHECK(back.test.mse == doctest::Approx(report.test.mse).epsilon(1e-12));
    CHECK(back.examples.size() == report.examples.size());
    CHECK(back.dataset_checksum == report.dataset_checksum);
}

TEST_CASE("trained experiments report, checkpoint, and re-evaluate") {
    const fs::path ds = temp_dir("exp_train");
    generate_dataset(tiny_gen(29), ds);
    ExperimentConfig cfg = tiny_experiment(ds, Mode::Stack);
    cfg.out_dir = ds / "out";
    const EvalReport report = run_experiment(cfg);

    CHECK(report.mode == "stack");
    CHECK(report.loss_history.size() == 2);
    check_report_consistency(report);
    CHECK(fs::exists(cfg.out_dir / "model.fdnn"));

    //

    ExperimentConfig eval_cfg = cfg;
    eval_cfg.out_dir.clear();
    const EvalReport eval_report =
        evaluate_checkpoint(eval_cfg, cfg.out_dir / "model.fdnn");
    CHECK(eval_report.test.mse == doctest::Approx(report.test.mse).epsilon(1e-9));
    CHECK(eval_report.train.mse == doctest::Approx(report.train.mse).epsilon(1e-9));

    // The checkpoint's channel count must match the mode.
    ExperimentConfig wrong = eval_cfg;
    wrong.mode = Mode::Single;
    CHECK_THROWS_AS(evaluate_checkpoint(wrong, cfg.out_dir / "model.fdnn"),
                    ConfigError);
}

TEST_CASE("single mode rejects slice indices beyond the stack") {
    const fs::path ds = temp_dir("exp_slice");
    generate_dataset(tiny_gen(31), ds);
    ExperimentConfig cfg = tiny_experiment(ds, Mode::Single);
    cfg.single_slice_index = 9;  // stack has 4 slices
    CHECK_THROWS_AS(run_experiment(cfg), ConfigError);
}

TEST_CASE("compare_modes runs both modes and writes the summaries") {
    const fs::path ds = temp_dir("cmp");
    generate_dataset(tiny_gen(37), ds);
    const fs::path out = ds / "cmp_out";
    const ExperimentConfig cfg_single = tiny_experiment(ds, Mode::Single);
    const ExperimentConfig cfg_stack = tiny_experiment(ds, Mode::Stack);
    const CompareResult result =
        compare_modes(cfg_single, cfg_stack, {1, 2}, out);

    CHECK(result.seeds.size() == 2);
    CHECK(result.median_single_mse > 0);
    CHECK(result.median_stack_mse > 0);
    CHECK(fs::exists(out / "compare.json"));
    CHECK(fs::exists(out / "compare.csv"));
    CHECK(fs::exists(out / "compare.md"));

    // The reference header carries the full-scale context numbers.
    std::ifstream in(out / "compare.json");
    nlohmann::json j;
    in >> j;
    CHECK(j["reference_full_scale"]["single"]["test_mse"].get<double>() ==
          doctest::Approx(355.27));
    CHECK(j["reference_full_scale"]["single"]["test_mae"].get<double>() ==
          doctest::Approx(12.53));
    CHECK(j["reference_full_scale"]["stack"]["test_mse"].get<double>() ==
          doctest::Approx(335.88));
    CHECK(j["reference_full_scale"]["stack"]["test_mae"].get<double>() ==
          doctest::Approx(12.11));
    CHECK(j["seeds"].size() == 2);

    // Mismatched hyperparameters are a config error.
    ExperimentConfig bad = cfg_stack;
    bad.train.learning_rate *= 2;
    CHECK_THROWS_AS(compare_modes(cfg_single, bad, {1}, ""), ConfigError);
    CHECK_THROWS_AS(compare_modes(cfg_stack, cfg_stack, {1}, ""), ConfigError);
}

TEST_CASE("figure rendering copes with empty inputs") {
    const fs::path out = temp_dir("figs");
    CHECK(render_report_figures({}, out, out / "f").empty());

    EvalReport empty;
    empty.mode = "classic";
    empty.label_width = empty.label_height = 8;
    CHECK(render_report_figures({empty}, out, out / "f2").empty());
    CHECK(fs::exists(out / "f2"));  // directory created, zero rows written
}

TEST_CASE("config JSON round-trips preserve every field") {
    DatasetGenConfig gen = tiny_gen(5);
    gen.perturb_magnitude = 0.07;
    gen.clean_labels = true;
    gen.lens.f_number = 2.5;
    gen.scene.texture_scale = 0.8;
    const DatasetGenConfig gen2 = dataset_gen_from_json(dataset_gen_to_json(gen));
    CHECK(gen2.seed == gen.seed);
    CHECK(gen2.count == gen.count);
    CHECK(gen2.augment_factor == gen.augment_factor);
    CHECK(gen2.perturb_magnitude == gen.perturb_magnitude);
    CHECK(gen2.n_slices == gen.n_slices);
    CHECK(gen2.slice_size == gen.slice_size);
    CHECK(gen2.label_size == gen.label_size);
    CHECK(gen2.clean_labels == gen.clean_labels);
    CHECK(gen2.lens.f_number == gen.lens.f_number);
    CHECK(gen2.scene.texture_scale == gen.scene.texture_scale);

    ExperimentConfig exp = tiny_experiment("/tmp/ds", Mode::Single);
    exp.single_slice_index = 2;
    exp.classic_measure = FocusMeasure::Tenengrad;
    exp.label_far_m = 5.0;
    const ExperimentConfig exp2 = experiment_from_json(experiment_to_json(exp));
    CHECK(exp2.mode == exp.mode);
    CHECK(exp2.dataset_dir == exp.dataset_dir);
    CHECK(exp2.train.learning_rate == exp.train.learning_rate);
    CHECK(exp2.train.epochs == exp.train.epochs);
    CHECK(exp2.single_slice_index == 2);
    CHECK(exp2.classic_measure == FocusMeasure::Tenengrad);
    CHECK(exp2.conv_channels == exp.conv_channels);
    CHECK(exp2.label_far_m == 5.0);
}
