#include "fstack/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <thread>

#include "fstack/errors.hpp"
#include "fstack/rng.hpp"

namespace fstack::nn {

using json = nlohmann::json;

void validate(const TrainConfig& cfg) {
    if (!(cfg.split_fraction > 0.0 && cfg.split_fraction < 1.0)) {
        throw ConfigError("split_fraction must lie in (0, 1)");
    }
    if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
}

Split random_split(int count, double fraction, std::uint64_t seed) {
    if (count < 1) throw ConfigError("cannot split an empty dataset");
    std::vector<int> ids(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) ids[static_cast<std::size_t>(i)] = i;
    Rng rng(seed);
    rng.shuffle(ids);
    const int n_train = std::clamp(
        static_cast<int>(std::llround(fraction * count)), 1, count - 1);
    Split split;
    split.train_indices.assign(ids.begin(), ids.begin() + n_train);
    split.test_indices.assign(ids.begin() + n_train, ids.end());
    return split;
}

Tensor assemble_input(const Example& ex, const ModelSpec& spec) {
    Tensor x = Tensor::zeros(
        {spec.input_channels, spec.input_height, spec.input_width});
    if (ex.input.size() != x.numel()) {
        throw ShapeError("example input size does not match the model spec");
    }
    constexpr float kInv = 1.0f / 255.0f;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        x.data[i] = static_cast<float>(ex.input[i]) * kInv;
    }
    return x;
}

TrainResult train(const std::vector<Example>& examples, const ModelSpec& spec,
                  const TrainConfig& cfg, const Split* split) {
    validate(cfg);
    if (examples.empty()) throw ConfigError("training dataset is empty");
    const int output_dim = spec.validate();
    for (const Example& ex : examples) {
        if (ex.label.size() != static_cast<std::size_t>(output_dim)) {
            throw ShapeError("label length does not match the model output");
        }
        if (ex.input.size() != examples.front().input.size()) {
            throw ShapeError("examples disagree on input size");
        }
    }

    TrainResult result;
    result.split = split ? *split
                         : random_split(static_cast<int>(examples.size()),
                                        cfg.split_fraction, cfg.seed);
    result.model = Model::init(spec, cfg.seed);

    std::vector<int> order = result.split.train_indices;
    if (order.empty()) throw ConfigError("training split is empty");

    const int hw = static_cast<int>(std::thread::hardware_concurrency());
    const int workers = std::clamp(cfg.threads > 0 ? cfg.threads : hw, 1,
                                   cfg.batch_size);

    Rng shuffle_rng = Rng(cfg.seed).fork(1);  // decorrelated from the init draws
    double initial_loss = -1.0;
    int divergent_epochs = 0;

    // One gradient slot and loss cell per batch position: workers fill their
    // slots independently, the reduction then runs in example order, so any
    // worker count produces bit-identical results.
    std::vector<Model::Gradients> slot_grads(
        static_cast<std::size_t>(cfg.batch_size));
    for (auto& g : slot_grads) g = result.model.zero_gradients();
    std::vector<double> slot_loss(static_cast<std::size_t>(cfg.batch_size));

    result.loss_history.reserve(static_cast<std::size_t>(cfg.epochs));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t begin = 0; begin < order.size();
             begin += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(
                order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
            const int count = static_cast<int>(end - begin);

            std::vector<std::exception_ptr> errors(
                static_cast<std::size_t>(workers));
            const auto worker = [&](int first_slot) {
                try {
                    Model::Cache cache;
                    for (int s = first_slot; s < count; s += workers) {
                        const Example& ex =
                            examples[static_cast<std::size_t>(order[begin + s])];
                        const Tensor x = assemble_input(ex, spec);
                        const Tensor y = result.model.forward(x, &cache);
                        slot_loss[static_cast<std::size_t>(s)] =
                            mse_loss<float>(y.data, ex.label);
                        const Tensor dy =
                            mse_grad(y, std::span<const float>(ex.label));
                        result.model.backward(
                            cache, dy, &slot_grads[static_cast<std::size_t>(s)]);
                    }
                } catch (...) {
                    errors[static_cast<std::size_t>(first_slot)] =
                        std::current_exception();
                }
            };
            if (workers == 1) {
                worker(0);
            } else {
                std::vector<std::thread> pool;
                pool.reserve(static_cast<std::size_t>(workers));
                for (int t = 0; t < workers; ++t) pool.emplace_back(worker, t);
                for (auto& th : pool) th.join();
            }
            for (const auto& err : errors) {
                if (err) std::rethrow_exception(err);
            }

            auto& total = slot_grads[0];
            for (int s = 1; s < count; ++s) {
                const auto& g = slot_grads[static_cast<std::size_t>(s)];
                for (std::size_t li = 0; li < total.weights.size(); ++li) {
                    for (std::size_t i = 0; i < total.weights[li].data.size(); ++i) {
                        total.weights[li].data[i] += g.weights[li].data[i];
                    }
                    for (std::size_t i = 0; i < total.biases[li].data.size(); ++i) {
                        total.biases[li].data[i] += g.biases[li].data[i];
                    }
                }
            }
            for (int s = 0; s < count; ++s) {
                epoch_loss += slot_loss[static_cast<std::size_t>(s)];
            }

            const float lr_scaled =
                static_cast<float>(cfg.learning_rate / static_cast<double>(count));
            sgd_step(result.model, total, lr_scaled);
            for (int s = 0; s < count; ++s) {
                auto& g = slot_grads[static_cast<std::size_t>(s)];
                for (auto& t : g.weights) std::fill(t.data.begin(), t.data.end(), 0.0f);
                for (auto& t : g.biases) std::fill(t.data.begin(), t.data.end(), 0.0f);
            }
        }
        epoch_loss /= static_cast<double>(order.size());
        result.loss_history.push_back(epoch_loss);
        if (epoch == 0) initial_loss = epoch_loss;
        if (!std::isfinite(epoch_loss) || epoch_loss > 1e3 * initial_loss) {
            if (++divergent_epochs >= 3) {
                throw NumericError(
                    "training diverged (loss > 1e3 x initial for 3 epochs); "
                    "lower the learning rate");
            }
        } else {
            divergent_epochs = 0;
        }
    }
    return result;
}

std::vector<float> predict(const Model& model, const Example& ex) {
    const Tensor x = assemble_input(ex, model.spec);
    return model.forward(x).data;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kModelMagic[4] = {'F', 'D', 'N', 'N'};
constexpr std::uint32_t kModelVersion = 1;

json spec_to_json(const ModelSpec& spec, std::uint64_t seed) {
    json layers = json::array();
    for (const LayerDesc& l : spec.layers) {
        json jl;
        switch (l.kind) {
            case LayerDesc::Kind::Conv: jl["kind"] = "conv"; break;
            case LayerDesc::Kind::Pool: jl["kind"] = "pool"; break;
            case LayerDesc::Kind::Flatten: jl["kind"] = "flatten"; break;
            case LayerDesc::Kind::Dense: jl["kind"] = "dense"; break;
        }
        if (l.out) jl["out"] = l.out;
        if (l.relu) jl["relu"] = true;
        layers.push_back(jl);
    }
    return json{{"input_channels", spec.input_channels},
                {"input_height", spec.input_height},
                {"input_width", spec.input_width},
                {"output_bias", spec.output_bias},
                {"layers", layers},
                {"seed", seed}};
}

std::pair<ModelSpec, std::uint64_t> spec_from_json(const json& j) {
    ModelSpec spec;
    spec.input_channels = j.at("input_channels").get<int>();
    spec.input_height = j.at("input_height").get<int>();
    spec.input_width = j.at("input_width").get<int>();
    spec.output_bias = j.value("output_bias", 0.0);
    for (const json& jl : j.at("layers")) {
        LayerDesc l;
        const std::string kind = jl.at("kind").get<std::string>();
        if (kind == "conv") {
            l.kind = LayerDesc::Kind::Conv;
        } else if (kind == "pool") {
            l.kind = LayerDesc::Kind::Pool;
        } else if (kind == "flatten") {
            l.kind = LayerDesc::Kind::Flatten;
        } else if (kind == "dense") {
            l.kind = LayerDesc::Kind::Dense;
        } else {
            throw FormatError("unknown layer kind in checkpoint: " + kind);
        }
        l.out = jl.value("out", 0);
        l.relu = jl.value("relu", false);
        spec.layers.push_back(l);
    }
    return {spec, j.value("seed", std::uint64_t{0})};
}

}  // namespace

void save_model(const Model& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(kModelMagic, 4);
    out.write(reinterpret_cast<const char*>(&kModelVersion), 4);
    const std::string spec_json = spec_to_json(model.spec, model.rng_seed).dump();
    const std::uint64_t len = spec_json.size();
    out.write(reinterpret_cast<const char*>(&len), 8);
    out.write(spec_json.data(), static_cast<std::streamsize>(len));
    for (std::size_t i = 0; i < model.weights.size(); ++i) {
        for (const auto* t : {&model.weights[i], &model.biases[i]}) {
            out.write(reinterpret_cast<const char*>(t->data.data()),
                      static_cast<std::streamsize>(t->data.size() * sizeof(float)));
        }
    }
    if (!out) throw IoError("short write: " + path.string());
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kModelMagic, 4) != 0) {
        throw FormatError("bad model file magic: " + path.string());
    }
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    if (version != kModelVersion) {
        throw FormatError("unsupported model version: " + path.string());
    }
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 8);
    if (!in || len > (1u << 20)) {
        throw FormatError("bad model header: " + path.string());
    }
    std::string spec_json(len, '\0');
    in.read(spec_json.data(), static_cast<std::streamsize>(len));
    json j;
    try {
        j = json::parse(spec_json);
    } catch (const json::parse_error& e) {
        throw FormatError("bad model spec JSON: " + std::string(e.what()));
    }
    const auto [spec, seed] = spec_from_json(j);
    Model model = Model::init(spec, seed);  // allocates the right shapes
    for (std::size_t i = 0; i < model.weights.size(); ++i) {
        for (auto* t : {&model.weights[i], &model.biases[i]}) {
            in.read(reinterpret_cast<char*>(t->data.data()),
                    static_cast<std::streamsize>(t->data.size() * sizeof(float)));
        }
    }
    if (!in) throw FormatError("truncated model file: " + path.string());
    return model;
}

}  // namespace fstack::nn
