#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>

#include "fstack/bench.hpp"
#include "fstack/errors.hpp"
#include "fstack/preprocess.hpp"

namespace {

using fstack::ConfigError;
using json = nlohmann::json;
namespace bench = fstack::bench;

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw fstack::IoError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("bad config JSON: " + std::string(e.what()));
    }
    return j;
}

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::string dataset_dir;
    std::string mode = "stack";
    std::uint64_t seed = 0;
    int epochs = 30;
    int batch_size = 32;
    double lr = 1e-3;
    double split = 0.85;
    int threads = 0;
};

void add_train_flags(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--seed", f.seed, "root random seed");
    cmd->add_option("--epochs", f.epochs, "training epochs");
    cmd->add_option("--batch-size", f.batch_size, "mini-batch size");
    cmd->add_option("--lr", f.lr, "SGD learning rate");
    cmd->add_option("--split", f.split, "train fraction, e.g. 0.85");
    cmd->add_option("--threads", f.threads, "batch workers (0 = hardware)");
}

bool flag_given(const CLI::App* cmd, const std::string& name) {
    const CLI::Option* opt = cmd->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
}

bench::ExperimentConfig make_experiment_config(const CLI::App* cmd,
                                               const CommonFlags& f) {
    const json file = load_config_file(f.config_path);
    bench::ExperimentConfig cfg;
    if (file.contains("experiment")) {
        cfg = bench::experiment_from_json(file["experiment"]);
    }
    if (flag_given(cmd, "--data")) cfg.dataset_dir = f.dataset_dir;
    if (flag_given(cmd, "--mode")) cfg.mode = bench::mode_from_string(f.mode);
    if (flag_given(cmd, "--seed")) cfg.train.seed = f.seed;
    if (flag_given(cmd, "--epochs")) cfg.train.epochs = f.epochs;
    if (flag_given(cmd, "--batch-size")) cfg.train.batch_size = f.batch_size;
    if (flag_given(cmd, "--lr")) cfg.train.learning_rate = f.lr;
    if (flag_given(cmd, "--split")) cfg.train.split_fraction = f.split;
    if (flag_given(cmd, "--threads")) cfg.train.threads = f.threads;
    if (flag_given(cmd, "--out")) cfg.out_dir = f.out_dir;
    if (cfg.dataset_dir.empty()) throw ConfigError("--data (dataset dir) is required");
    return cfg;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"depth-from-focus toolkit: synthetic focal stacks, a"
                 " from-scratch CNN, and a classical shape-from-focus baseline"};
    app.require_subcommand(1);

    // generate -----------------------------------------------------------
    auto* gen = app.add_subcommand("generate", "synthesize a focal-stack dataset");
    CommonFlags gf;
    int gen_count = 500;
    int gen_slices = 8;
    int gen_augment = 0;
    gen->add_option("--config", gf.config_path, "JSON config file");
    gen->add_option("--out", gf.out_dir, "output dataset directory")->required();
    gen->add_option("--seed", gf.seed, "root random seed");
    gen->add_option("--count", gen_count, "number of unique scenes");
    gen->add_option("--slices", gen_slices, "slices per stack (N)");
    gen->add_option("--augment", gen_augment, "perturbed copies per scene");

    // preprocess ----------------------------------------------------------
    auto* prep = app.add_subcommand(
        "preprocess", "clean labels (erode-dilate-blur) and/or resize a dataset");
    std::string prep_in, prep_out;
    int prep_radius = 1;
    double prep_sigma = 1.5;
    int prep_slice_size = 0, prep_label_size = 0;
    bool prep_clean = true;
    prep->add_option("--in", prep_in, "input dataset")->required();
    prep->add_option("--out", prep_out, "output dataset")->required();
    prep->add_option("--radius", prep_radius, "morphology radius");
    prep->add_option("--sigma", prep_sigma, "Gaussian sigma");
    prep->add_flag("--clean,!--no-clean", prep_clean, "run the cleaning chain");
    prep->add_option("--slice-size", prep_slice_size, "resize slices (0 keeps)");
    prep->add_option("--label-size", prep_label_size, "resize labels (0 keeps)");

    // train / eval / classic ----------------------------------------------
    auto* train = app.add_subcommand("train", "train a model and report errors");
    CommonFlags tf;
    train->add_option("--config", tf.config_path, "JSON config file");
    train->add_option("--data", tf.dataset_dir, "dataset directory");
    train->add_option("--out", tf.out_dir, "report/checkpoint directory");
    train->add_option("--mode", tf.mode, "single|stack")
        ->check(CLI::IsMember({"single", "stack"}));
    add_train_flags(train, tf);

    auto* eval = app.add_subcommand("eval", "score a saved checkpoint");
    CommonFlags ef;
    std::string eval_model;
    eval->add_option("--config", ef.config_path, "JSON config file");
    eval->add_option("--data", ef.dataset_dir, "dataset directory");
    eval->add_option("--model", eval_model, "checkpoint path")->required();
    eval->add_option("--out", ef.out_dir, "report directory");
    eval->add_option("--mode", ef.mode, "single|stack")
        ->check(CLI::IsMember({"single", "stack"}));
    add_train_flags(eval, ef);

    auto* classic = app.add_subcommand("classic", "shape-from-focus baseline");
    CommonFlags cf;
    std::string classic_measure = "modified_laplacian";
    classic->add_option("--config", cf.config_path, "JSON config file");
    classic->add_option("--data", cf.dataset_dir, "dataset directory");
    classic->add_option("--out", cf.out_dir, "report directory");
    classic->add_option("--measure", classic_measure,
                        "modified_laplacian|tenengrad")
        ->check(CLI::IsMember({"modified_laplacian", "tenengrad"}));
    classic->add_option("--seed", cf.seed, "split seed");
    classic->add_option("--split", cf.split, "train fraction");

    // compare ---------------------------------------------------------------
    auto* compare = app.add_subcommand(
        "compare", "single vs stack on one dataset across seeds");
    CommonFlags pf;
    std::vector<std::uint64_t> compare_seeds{1, 2, 3};
    compare->add_option("--config", pf.config_path, "JSON config file");
    compare->add_option("--data", pf.dataset_dir, "dataset directory");
    compare->add_option("--out", pf.out_dir, "comparison output directory");
    compare->add_option("--seeds", compare_seeds, "seeds, e.g. --seeds 1 2 3");
    add_train_flags(compare, pf);

    // render ------------------------------------------------------------
    auto* render = app.add_subcommand("render", "figures from saved reports");
    std::vector<std::string> render_reports;
    std::string render_data, render_out;
    render->add_option("--report", render_reports, "report.json paths (1+)")
        ->required();
    render->add_option("--data", render_data, "dataset directory")->required();
    render->add_option("--out", render_out, "figure directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? fstack::exit_code::ok : fstack::exit_code::config;
    }

    if (gen->parsed()) {
        const json file = load_config_file(gf.config_path);
        bench::DatasetGenConfig cfg;
        if (file.contains("generate")) {
            cfg = bench::dataset_gen_from_json(file["generate"]);
        }
        if (flag_given(gen, "--seed")) cfg.seed = gf.seed;
        if (flag_given(gen, "--count")) cfg.count = gen_count;
        if (flag_given(gen, "--slices")) cfg.n_slices = gen_slices;
        if (flag_given(gen, "--augment")) cfg.augment_factor = gen_augment;
        const auto manifest = bench::generate_dataset(cfg, gf.out_dir);
        std::printf("wrote %zu examples to %s\n", manifest.examples.size(),
                    gf.out_dir.c_str());
        return fstack::exit_code::ok;
    }

    if (prep->parsed()) {
        const auto manifest = fstack::load_manifest(prep_in);
        fstack::DatasetManifest out_manifest;
        out_manifest.format_version = manifest.format_version;
        std::filesystem::create_directories(prep_out);
        for (const fstack::ManifestEntry& e : manifest.examples) {
            fstack::StackExample ex = fstack::load_stack(
                std::filesystem::path(prep_in) / e.id);
            fstack::ManifestEntry ne = e;
            if (prep_clean) {
                ex.stack.depth_label =
                    fstack::clean_depth(ex.stack.depth_label, prep_radius, prep_sigma);
            }
            if (prep_slice_size > 0) {
                for (fstack::Image& s : ex.stack.slices) {
                    s = fstack::crop_resize(s, {0, 0, s.width, s.height},
                                            prep_slice_size, prep_slice_size);
                }
                ne.width = ne.height = prep_slice_size;
            }
            if (prep_label_size > 0) {
                auto& l = ex.stack.depth_label;
                l = fstack::crop_resize(l, {0, 0, l.width, l.height},
                                        prep_label_size, prep_label_size);
                ne.label_width = ne.label_height = prep_label_size;
            }
            fstack::save_stack(ex, std::filesystem::path(prep_out) / e.id);
            out_manifest.examples.push_back(ne);
        }
        fstack::save_manifest(out_manifest, prep_out);
        std::printf("preprocessed %zu examples into %s\n",
                    out_manifest.examples.size(), prep_out.c_str());
        return fstack::exit_code::ok;
    }

    if (train->parsed()) {
        auto cfg = make_experiment_config(train, tf);
        if (cfg.mode == bench::Mode::Classic) {
            throw ConfigError("use the classic subcommand for classic mode");
        }
        const auto report = bench::run_experiment(cfg);
        std::printf("%s: train MSE %.3f MAE %.3f | test MSE %.3f MAE %.3f\n",
                    report.mode.c_str(), report.train.mse, report.train.mae,
                    report.test.mse, report.test.mae);
        return fstack::exit_code::ok;
    }

    if (eval->parsed()) {
        auto cfg = make_experiment_config(eval, ef);
        const auto report = bench::evaluate_checkpoint(cfg, eval_model);
        std::printf("%s: train MSE %.3f MAE %.3f | test MSE %.3f MAE %.3f\n",
                    report.mode.c_str(), report.train.mse, report.train.mae,
                    report.test.mse, report.test.mae);
        return fstack::exit_code::ok;
    }

    if (classic->parsed()) {
        bench::ExperimentConfig cfg;
        const json file = load_config_file(cf.config_path);
        if (file.contains("experiment")) {
            cfg = bench::experiment_from_json(file["experiment"]);
        }
        cfg.mode = bench::Mode::Classic;
        if (flag_given(classic, "--data")) cfg.dataset_dir = cf.dataset_dir;
        if (flag_given(classic, "--out")) cfg.out_dir = cf.out_dir;
        if (flag_given(classic, "--seed")) cfg.train.seed = cf.seed;
        if (flag_given(classic, "--split")) cfg.train.split_fraction = cf.split;
        if (flag_given(classic, "--measure")) {
            cfg.classic_measure = classic_measure == "tenengrad"
                                      ? fstack::FocusMeasure::Tenengrad
                                      : fstack::FocusMeasure::ModifiedLaplacian;
        }
        if (cfg.dataset_dir.empty()) throw ConfigError("--data is required");
        const auto report = bench::run_experiment(cfg);
        std::printf("classic: train MSE %.3f MAE %.3f | test MSE %.3f MAE %.3f\n",
                    report.train.mse, report.train.mae, report.test.mse,
                    report.test.mae);
        return fstack::exit_code::ok;
    }

    if (compare->parsed()) {
        auto base = make_experiment_config(compare, pf);
        base.out_dir.clear();  // per-seed dirs are derived inside
        bench::ExperimentConfig cfg_single = base;
        bench::ExperimentConfig cfg_stack = base;
        cfg_single.mode = bench::Mode::Single;
        cfg_stack.mode = bench::Mode::Stack;
        const auto result = bench::compare_modes(cfg_single, cfg_stack,
                                                 compare_seeds, pf.out_dir);
        std::printf("median test MSE: single %.3f, stack %.3f (ratio %.4f)\n",
                    result.median_single_mse, result.median_stack_mse,
                    result.median_stack_mse / result.median_single_mse);
        return fstack::exit_code::ok;
    }

    if (render->parsed()) {
        std::vector<bench::EvalReport> reports;
        for (const std::string& p : render_reports) {
            reports.push_back(bench::load_report(p));
        }
        const auto paths =
            bench::render_report_figures(reports, render_data, render_out);
        std::printf("wrote %zu figure rows to %s\n", paths.size(),
                    render_out.c_str());
        return fstack::exit_code::ok;
    }

    return fstack::exit_code::ok;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return fstack::exit_code::config;
    } catch (const fstack::NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return fstack::exit_code::numeric;
    } catch (const fstack::IoError& e) {
        std::fprintf(stderr, "I/O error: %s\n", e.what());
        return fstack::exit_code::io;
    } catch (const fstack::FormatError& e) {
        std::fprintf(stderr, "corrupt data: %s\n", e.what());
        return fstack::exit_code::io;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
