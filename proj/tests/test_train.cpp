#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fstack/errors.hpp"
#include "fstack/rng.hpp"
#include "fstack/train.hpp"

using namespace fstack;
using namespace fstack::nn;

namespace {

ModelSpec tiny_spec(int channels, int size, int out_dim) {
    ModelSpec spec;
    spec.input_channels = channels;
    spec.input_height = size;
    spec.input_width = size;
    spec.layers = {
        {LayerDesc::Kind::Conv, 4, true},
        {LayerDesc::Kind::Pool, 0, false},
        {LayerDesc::Kind::Flatten, 0, false},
        {LayerDesc::Kind::Dense, out_dim, false},
    };
    return spec;
}

std::vector<Example> toy_dataset(int count, int channels, int size, int out_dim,
                                 std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Example> examples(static_cast<std::size_t>(count));
    for (Example& ex : examples) {
        ex.input.resize(static_cast<std::size_t>(channels) * size * size);
        for (auto& v : ex.input) {
            v = static_cast<std::uint8_t>(rng.uniform_int(256));
        }
        ex.label.resize(static_cast<std::size_t>(out_dim));
        for (auto& v : ex.label) v = static_cast<float>(rng.uniform(0.0, 1.0));
    }
    return examples;
}

}  // namespace

TEST_CASE("sgd_step applies w <- w - lr * g") {
    ModelSpec spec;
    spec.input_channels = 1;
    spec.input_height = 1;
    spec.input_width = 1;
    spec.layers = {{LayerDesc::Kind::Flatten, 0, false},
                   {LayerDesc::Kind::Dense, 1, false}};
    auto model = Model::init(spec, 0);
    model.weights[1].data[0] = 1.0f;
    auto grads = model.zero_gradients();
    grads.weights[1].data[0] = 2.0f;

    SUBCASE("zero learning rate changes nothing") {
        sgd_step(model, grads, 0.0f);
        CHECK(model.weights[1].data[0] == 1.0f);
    }
    SUBCASE("the scalar example lands on 0.8") {
        sgd_step(model, grads, 0.1f);
        CHECK(model.weights[1].data[0] == doctest::Approx(0.8f).epsilon(1e-7));
    }
    SUBCASE("two steps equal one step with summed gradients") {
        auto twice = model;
        sgd_step(twice, grads, 0.1f);
        sgd_step(twice, grads, 0.1f);
        auto summed = model;
        auto grads2 = grads;
        grads2.weights[1].data[0] *= 2.0f;
        sgd_step(summed, grads2, 0.1f);
        CHECK(twice.weights[1].data[0] ==
              doctest::Approx(summed.weights[1].data[0]).epsilon(1e-7));
    }
}

TEST_CASE("random_split partitions exactly and deterministically") {
    const Split s = random_split(100, 0.85, 9);
    CHECK(s.train_indices.size() == 85);
    CHECK(s.test_indices.size() == 15);
    std::vector<bool> seen(100, false);
    for (int i : s.train_indices) seen[static_cast<std::size_t>(i)] = true;
    for (int i : s.test_indices) {
        CHECK(!seen[static_cast<std::size_t>(i)]);
        seen[static_cast<std::size_t>(i)] = true;
    }
    for (bool b : seen) CHECK(b);

    const Split again = random_split(100, 0.85, 9);
    CHECK(again.train_indices == s.train_indices);
    const Split other = random_split(100, 0.85, 10);
    CHECK(other.train_indices != s.train_indices);
}

TEST_CASE("a tiny dataset is memorized (overfit smoke)") {
    const auto examples = toy_dataset(4, 1, 8, 4, 3);
    TrainConfig cfg;
    cfg.learning_rate = 0.2;
    cfg.batch_size = 4;
    cfg.epochs = 500;
    cfg.seed = 5;
    Split split;
    split.train_indices = {0, 1, 2, 3};
    const TrainResult result = train(examples, tiny_spec(1, 8, 4), cfg, &split);
    REQUIRE(result.loss_history.size() == 500);
    CHECK(result.loss_history.back() < 0.01 * result.loss_history.front());
}

TEST_CASE("training is deterministic in the seed") {
    const auto examples = toy_dataset(8, 1, 8, 4, 21);
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.batch_size = 4;
    cfg.epochs = 6;
    cfg.seed = 77;
    const TrainResult a = train(examples, tiny_spec(1, 8, 4), cfg);
    const TrainResult b = train(examples, tiny_spec(1, 8, 4), cfg);
    CHECK(a.loss_history == b.loss_history);
    for (std::size_t i = 0; i < a.model.weights.size(); ++i) {
        CHECK(a.model.weights[i].data == b.model.weights[i].data);
    }
    cfg.seed = 78;
    const TrainResult c = train(examples, tiny_spec(1, 8, 4), cfg);
    CHECK(a.loss_history != c.loss_history);
}

TEST_CASE("runaway learning rates raise the divergence error") {
    const auto examples = toy_dataset(6, 1, 8, 4, 8);
    TrainConfig cfg;
    cfg.learning_rate = 1e5;
    cfg.batch_size = 2;
    cfg.epochs = 30;
    cfg.seed = 1;
    CHECK_THROWS_AS(train(examples, tiny_spec(1, 8, 4), cfg), NumericError);
}

TEST_CASE("gradient accumulation is order-independent in exact arithmetic") {
    // 64-bit model: permuting the batch must leave the summed gradients and
    // the batch loss unchanged to tight tolerance.
    ModelSpec spec = tiny_spec(1, 4, 3);
    auto model = ModelT<double>::init(spec, 11);
    Rng rng(31);
    std::vector<TensorT<double>> xs;
    std::vector<std::vector<double>> labels;
    for (int i = 0; i < 5; ++i) {
        TensorT<double> x = TensorT<double>::zeros({1, 4, 4});
        for (auto& v : x.data) v = rng.uniform();
        xs.push_back(std::move(x));
        labels.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
    }
    const auto run_order = [&](const std::vector<int>& order) {
        auto grads = model.zero_gradients();
        double loss = 0.0;
        ModelT<double>::Cache cache;
        for (int i : order) {
            const auto y = model.forward(xs[static_cast<std::size_t>(i)], &cache);
            loss += mse_loss<double>(y.data, labels[static_cast<std::size_t>(i)]);
            const auto dy =
                mse_grad(y, std::span<const double>(labels[static_cast<std::size_t>(i)]));
            model.backward(cache, dy, &grads);
        }
        return std::pair{loss, std::move(grads)};
    };
    const auto [loss_a, grads_a] = run_order({0, 1, 2, 3, 4});
    const auto [loss_b, grads_b] = run_order({4, 2, 0, 3, 1});
    CHECK(loss_a == doctest::Approx(loss_b).epsilon(1e-12));
    for (std::size_t li = 0; li < grads_a.weights.size(); ++li) {
        for (std::size_t i = 0; i < grads_a.weights[li].data.size(); ++i) {
            CHECK(grads_a.weights[li].data[i] ==
                  doctest::Approx(grads_b.weights[li].data[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("worker count never changes the result") {
    const auto examples = toy_dataset(10, 1, 8, 4, 40);
    TrainConfig cfg;
    cfg.learning_rate = 0.02;
    cfg.batch_size = 5;
    cfg.epochs = 4;
    cfg.seed = 13;
    cfg.threads = 1;
    const TrainResult one = train(examples, tiny_spec(1, 8, 4), cfg);
    cfg.threads = 4;
    const TrainResult four = train(examples, tiny_spec(1, 8, 4), cfg);
    CHECK(one.loss_history == four.loss_history);
    for (std::size_t i = 0; i < one.model.weights.size(); ++i) {
        CHECK(one.model.weights[i].data == four.model.weights[i].data);
        CHECK(one.model.biases[i].data == four.model.biases[i].data);
    }
}

TEST_CASE("checkpoints round-trip through FDNN files") {
    const auto dir = std::filesystem::temp_directory_path() / "fstack_tests";
    std::filesystem::create_directories(dir);
    const auto path = dir / "model.fdnn";

    const auto examples = toy_dataset(4, 1, 8, 4, 2);
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.batch_size = 2;
    cfg.epochs = 3;
    cfg.seed = 9;
    ModelSpec spec = tiny_spec(1, 8, 4);
    spec.output_bias = 0.5;
    const TrainResult result = train(examples, spec, cfg);
    save_model(result.model, path);
    const Model loaded = load_model(path);

    CHECK(loaded.spec.output_bias == 0.5);
    CHECK(loaded.rng_seed == result.model.rng_seed);
    for (std::size_t i = 0; i < loaded.weights.size(); ++i) {
        CHECK(loaded.weights[i].data == result.model.weights[i].data);
        CHECK(loaded.biases[i].data == result.model.biases[i].data);
    }
    CHECK(predict(loaded, examples[0]) == predict(result.model, examples[0]));

    // Corrupt magic is rejected.
    {
        std::ofstream out(dir / "bad.fdnn", std::ios::binary);
        out << "NOPE";
    }
    CHECK_THROWS_AS(load_model(dir / "bad.fdnn"), FormatError);
}

TEST_CASE("train validates its configuration") {
    const auto examples = toy_dataset(4, 1, 8, 4, 2);
    TrainConfig cfg;
    cfg.split_fraction = 1.5;
    CHECK_THROWS_AS(train(examples, tiny_spec(1, 8, 4), cfg), ConfigError);
    cfg.split_fraction = 0.85;
    cfg.batch_size = 0;
    CHECK_THROWS_AS(train(examples, tiny_spec(1, 8, 4), cfg), ConfigError);
    cfg.batch_size = 2;
    CHECK_THROWS_AS(train({}, tiny_spec(1, 8, 4), cfg), ConfigError);
}
