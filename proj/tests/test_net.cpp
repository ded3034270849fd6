#include <doctest.h>

#include <cmath>
#include <limits>

#include "fstack/net.hpp"
#include "fstack/rng.hpp"

using namespace fstack;
using namespace fstack::nn;

namespace {

template <typename T>
TensorT<T> random_tensor(Rng& rng, std::vector<int> shape, double lo = -0.5,
                         double hi = 0.5) {
    TensorT<T> t = TensorT<T>::zeros(std::move(shape));
    for (T& v : t.data) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

// Independent reference: direct six-nested-loop cross-correlation in double.
TensorT<double> conv_reference(const TensorT<double>& x, const TensorT<double>& w,
                               const TensorT<double>& b) {
    const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
    const int F = w.dim(0);
    TensorT<double> y = TensorT<double>::zeros({F, H, W});
    for (int f = 0; f < F; ++f) {
        for (int oy = 0; oy < H; ++oy) {
            for (int ox = 0; ox < W; ++ox) {
                double acc = b.data[static_cast<std::size_t>(f)];
                for (int c = 0; c < C; ++c) {
                    for (int ky = 0; ky < 3; ++ky) {
                        for (int kx = 0; kx < 3; ++kx) {
                            const int sy = oy + ky - 1;
                            const int sx = ox + kx - 1;
                            if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
                            acc += w.data[((static_cast<std::size_t>(f) * C + c) * 3 +
                                           ky) * 3 + kx] *
                                   x.data[(static_cast<std::size_t>(c) * H + sy) * W +
                                          sx];
                        }
                    }
                }
                y.data[(static_cast<std::size_t>(f) * H + oy) * W + ox] = acc;
            }
        }
    }
    return y;
}

// Central finite differences through a scalar loss over every parameter (or a
// probe subset), against the analytic gradients.
struct GradCheck {
    double max_rel_err = 0.0;
    int probes = 0;
};

GradCheck check_model_gradients(ModelT<double>& model, const TensorT<double>& x,
                                const std::vector<double>& label,
                                int probes_per_tensor) {
    ModelT<double>::Cache cache;
    const TensorT<double> y = model.forward(x, &cache);
    auto grads = model.zero_gradients();
    const TensorT<double> dy = mse_grad(y, std::span<const double>(label));
    model.backward(cache, dy, &grads);

    const auto loss_at = [&]() {
        const TensorT<double> out = model.forward(x);
        return mse_loss<double>(out.data, label);
    };

    GradCheck result;
    Rng rng(123);
    const double h = 1e-4;
    for (std::size_t li = 0; li < model.weights.size(); ++li) {
        for (auto* pair : {&model.weights, &model.biases}) {
            TensorT<double>& param = (*pair)[li];
            if (param.numel() == 0) continue;
            TensorT<double>& grad =
                pair == &model.weights ? grads.weights[li] : grads.biases[li];
            const int probes = std::min<int>(probes_per_tensor,
                                             static_cast<int>(param.numel()));
            for (int p = 0; p < probes; ++p) {
                const std::size_t idx =
                    static_cast<std::size_t>(rng.uniform_int(param.numel()));
                const double saved = param.data[idx];
                param.data[idx] = saved + h;
                const double lp = loss_at();
                param.data[idx] = saved - h;
                const double lm = loss_at();
                param.data[idx] = saved;
                const double fd = (lp - lm) / (2.0 * h);
                const double an = grad.data[idx];
                const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
                result.max_rel_err =
                    std::max(result.max_rel_err, std::abs(fd - an) / denom);
                ++result.probes;
            }
        }
    }
    return result;
}

}  // namespace

TEST_CASE("an identity kernel reproduces its input") {
    Rng rng(1);
    const Tensor x = random_tensor<float>(rng, {1, 5, 5});
    Tensor w = Tensor::zeros({1, 1, 3, 3});
    w.data[4] = 1.0f;  // center tap
    const Tensor b = Tensor::zeros({1});
    const Tensor y = conv2d_forward(x, w, b);
    CHECK(y.data == x.data);
}

TEST_CASE("zero input leaves only the bias") {
    const Tensor x = Tensor::zeros({2, 4, 4});
    Rng rng(2);
    const Tensor w = random_tensor<float>(rng, {3, 2, 3, 3});
    Tensor b = Tensor::zeros({3});
    b.data = {0.25f, -1.5f, 2.0f};
    const Tensor y = conv2d_forward(x, w, b);
    for (int f = 0; f < 3; ++f) {
        for (int i = 0; i < 16; ++i) {
            CHECK(y.data[static_cast<std::size_t>(f) * 16 + i] == b.data[static_cast<std::size_t>(f)]);
        }
    }
}

TEST_CASE("channel mismatches are shape errors") {
    const Tensor x = Tensor::zeros({2, 4, 4});
    const Tensor w = Tensor::zeros({3, 5, 3, 3});
    const Tensor b = Tensor::zeros({3});
    CHECK_THROWS_AS(conv2d_forward(x, w, b), ShapeError);
}

TEST_CASE("fast conv path matches the nested-loop oracle on 100 random cases") {
    Rng rng(77);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int C = 1 + static_cast<int>(rng.uniform_int(2));
        const int F = 1 + static_cast<int>(rng.uniform_int(3));
        const int H = 2 + static_cast<int>(rng.uniform_int(5));
        const int W = 2 + static_cast<int>(rng.uniform_int(5));
        const auto xd = random_tensor<double>(rng, {C, H, W});
        const auto wd = random_tensor<double>(rng, {F, C, 3, 3});
        const auto bd = random_tensor<double>(rng, {F});

        Tensor xf = Tensor::zeros(xd.shape);
        Tensor wf = Tensor::zeros(wd.shape);
        Tensor bf = Tensor::zeros(bd.shape);
        for (std::size_t i = 0; i < xd.data.size(); ++i) xf.data[i] = static_cast<float>(xd.data[i]);
        for (std::size_t i = 0; i < wd.data.size(); ++i) wf.data[i] = static_cast<float>(wd.data[i]);
        for (std::size_t i = 0; i < bd.data.size(); ++i) bf.data[i] = static_cast<float>(bd.data[i]);

        const auto expected = conv_reference(xd, wd, bd);
        const Tensor got = conv2d_forward(xf, wf, bf);
        REQUIRE(got.data.size() == expected.data.size());
        for (std::size_t i = 0; i < got.data.size(); ++i) {
            worst = std::max(worst,
                             std::abs(static_cast<double>(got.data[i]) - expected.data[i]));
        }
    }
    CHECK(worst <= 1e-6);
}

TEST_CASE("relu, maxpool, and dense behave on the worked examples") {
    SUBCASE("relu clips negatives") {
        Tensor x = Tensor::zeros({3});
        x.data = {-1.0f, 0.0f, 2.0f};
        CHECK(relu(x).data == std::vector<float>{0.0f, 0.0f, 2.0f});
    }
    SUBCASE("maxpool of [[1,2],[3,4]] is [[4]]") {
        Tensor x = Tensor::zeros({1, 2, 2});
        x.data = {1.0f, 2.0f, 3.0f, 4.0f};
        const Tensor y = maxpool2x2_forward<float>(x, nullptr);
        CHECK(y.shape == std::vector<int>{1, 1, 1});
        CHECK(y.data[0] == 4.0f);
    }
    SUBCASE("maxpool rejects odd spatial dims") {
        const Tensor x = Tensor::zeros({1, 3, 4});
        CHECK_THROWS_AS(maxpool2x2_forward<float>(x, nullptr), ShapeError);
    }
    SUBCASE("ties route the gradient to the first row-major maximum") {
        Tensor x = Tensor::zeros({1, 2, 2});
        x.data = {5.0f, 5.0f, 5.0f, 5.0f};
        std::vector<std::uint8_t> argmax;
        maxpool2x2_forward(x, &argmax);
        REQUIRE(argmax.size() == 1);
        CHECK(argmax[0] == 0);
        Tensor dy = Tensor::zeros({1, 1, 1});
        dy.data = {7.0f};
        const Tensor dx = maxpool2x2_backward(dy, argmax, {1, 2, 2});
        CHECK(dx.data == std::vector<float>{7.0f, 0.0f, 0.0f, 0.0f});
    }
    SUBCASE("dense with identity weights passes the input through") {
        Tensor x = Tensor::zeros({3});
        x.data = {1.5f, -2.0f, 0.5f};
        Tensor w = Tensor::zeros({3, 3});
        w.data[0] = w.data[4] = w.data[8] = 1.0f;
        const Tensor b = Tensor::zeros({3});
        CHECK(dense_forward(x, w, b).data == x.data);
    }
}

TEST_CASE("mse loss on the worked example and against finite differences") {
    std::vector<float> pred{0.0f, 0.0f};
    std::vector<float> target{1.0f, 2.0f};
    CHECK(mse_loss<float>(pred, target) == doctest::Approx(2.5).epsilon(1e-9));
    CHECK(mse_loss<float>(target, target) == 0.0);
    CHECK_THROWS_AS(mse_loss<float>(pred, std::vector<float>{1.0f}), ShapeError);

    // d(mse)/d(pred) against central differences at 64-bit.
    Rng rng(5);
    TensorT<double> p = random_tensor<double>(rng, {9}, -2.0, 2.0);
    const TensorT<double> t = random_tensor<double>(rng, {9}, -2.0, 2.0);
    const TensorT<double> g = mse_grad(p, std::span<const double>(t.data));
    const double h = 1e-4;
    for (std::size_t i = 0; i < p.data.size(); ++i) {
        const double saved = p.data[i];
        p.data[i] = saved + h;
        const double lp = mse_loss<double>(p.data, t.data);
        p.data[i] = saved - h;
        const double lm = mse_loss<double>(p.data, t.data);
        p.data[i] = saved;
        const double fd = (lp - lm) / (2.0 * h);
        CHECK(g.data[i] == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("every layer type passes the finite-difference gradient check") {
    ModelSpec spec;
    spec.input_channels = 2;
    spec.input_height = 4;
    spec.input_width = 4;
    spec.layers = {
        {LayerDesc::Kind::Conv, 3, true},
        {LayerDesc::Kind::Pool, 0, false},
        {LayerDesc::Kind::Conv, 2, true},
        {LayerDesc::Kind::Flatten, 0, false},
        {LayerDesc::Kind::Dense, 5, true},
        {LayerDesc::Kind::Dense, 4, false},
    };
    auto model = ModelT<double>::init(spec, 99);
    Rng rng(17);
    const auto x = random_tensor<double>(rng, {2, 4, 4}, 0.0, 1.0);
    std::vector<double> label(4);
    for (double& v : label) v = rng.uniform(-1.0, 1.0);

    const GradCheck res = check_model_gradients(model, x, label, 25);
    CHECK(res.probes >= 20 * 4);  // at least 20 per parameterized layer
    CHECK(res.max_rel_err <= 1e-4);
}

TEST_CASE("gradients vanish when the label equals the output") {
    ModelSpec spec;
    spec.input_channels = 1;
    spec.input_height = 2;
    spec.input_width = 2;
    spec.layers = {
        {LayerDesc::Kind::Conv, 2, true},
        {LayerDesc::Kind::Flatten, 0, false},
        {LayerDesc::Kind::Dense, 3, false},
    };
    auto model = ModelT<double>::init(spec, 3);
    Rng rng(4);
    const auto x = random_tensor<double>(rng, {1, 2, 2}, 0.0, 1.0);
    ModelT<double>::Cache cache;
    const auto y = model.forward(x, &cache);
    auto grads = model.zero_gradients();
    const auto dy = mse_grad(y, std::span<const double>(y.data));
    model.backward(cache, dy, &grads);
    for (const auto& g : grads.weights) {
        for (double v : g.data) CHECK(v == 0.0);
    }
    for (const auto& g : grads.biases) {
        for (double v : g.data) CHECK(v == 0.0);
    }
}

TEST_CASE("summing a gradient twice doubles every entry") {
    ModelSpec spec;
    spec.input_channels = 1;
    spec.input_height = 4;
    spec.input_width = 4;
    spec.layers = {
        {LayerDesc::Kind::Conv, 2, true},
        {LayerDesc::Kind::Pool, 0, false},
        {LayerDesc::Kind::Flatten, 0, false},
        {LayerDesc::Kind::Dense, 3, false},
    };
    auto model = ModelT<double>::init(spec, 11);
    Rng rng(12);
    const auto x = random_tensor<double>(rng, {1, 4, 4}, 0.0, 1.0);
    std::vector<double> label(3, 0.25);

    ModelT<double>::Cache cache;
    const auto y = model.forward(x, &cache);
    const auto dy = mse_grad(y, std::span<const double>(label));
    auto once = model.zero_gradients();
    model.backward(cache, dy, &once);
    auto twice = model.zero_gradients();
    model.backward(cache, dy, &twice);
    model.backward(cache, dy, &twice);
    for (std::size_t li = 0; li < once.weights.size(); ++li) {
        for (std::size_t i = 0; i < once.weights[li].data.size(); ++i) {
            CHECK(twice.weights[li].data[i] ==
                  doctest::Approx(2.0 * once.weights[li].data[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("non-finite values are caught and name the layer") {
    ModelSpec spec;
    spec.input_channels = 1;
    spec.input_height = 2;
    spec.input_width = 2;
    spec.layers = {
        {LayerDesc::Kind::Conv, 2, true},
        {LayerDesc::Kind::Conv, 2, true},
        {LayerDesc::Kind::Flatten, 0, false},
        {LayerDesc::Kind::Dense, 2, false},
    };
    auto model = Model::init(spec, 1);
    model.weights[1].data[0] = std::numeric_limits<float>::infinity();
    Tensor x = Tensor::zeros({1, 2, 2});
    x.data = {0.5f, 0.25f, 0.75f, 1.0f};
    CHECK_THROWS_WITH_AS(model.forward(x), doctest::Contains("conv2"),
                         NumericError);
}

TEST_CASE("the 6-conv architecture hits the published shapes") {
    SUBCASE("full scale: 224x224 with four pools ends at 576 outputs") {
        const ModelSpec spec = ModelSpec::cnn6(3, 224, 224, 576);
        CHECK(spec.validate() == 576);
        int convs = 0, pools = 0, denses = 0;
        for (const auto& l : spec.layers) {
            convs += l.kind == LayerDesc::Kind::Conv;
            pools += l.kind == LayerDesc::Kind::Pool;
            denses += l.kind == LayerDesc::Kind::Dense;
        }
        CHECK(convs == 6);
        CHECK(pools == 4);
        CHECK(denses == 2);
        CHECK(spec.layers.back().relu == false);  // linear regression head
    }
    SUBCASE("desk scale: 64x64 with 16x16 labels") {
        const ModelSpec spec = ModelSpec::cnn6(24, 64, 64, 256);
        CHECK(spec.validate() == 256);
    }
    SUBCASE("a stack input is 3N channels deep") {
        const ModelSpec spec = ModelSpec::cnn6(3 * 8, 64, 64, 256);
        auto model = Model::init(spec, 0);
        CHECK(model.weights.front().dim(1) == 24);
    }
    SUBCASE("spatial sizes that break the pooling chain are rejected") {
        CHECK_THROWS_AS(ModelSpec::cnn6(3, 100, 100, 576).validate(), ShapeError);
    }
}

TEST_CASE("model init is deterministic in the seed") {
    const ModelSpec spec = ModelSpec::cnn6(3, 32, 32, 64, {4, 4, 8, 8, 8, 8}, 16);
    const auto a = Model::init(spec, 42);
    const auto b = Model::init(spec, 42);
    const auto c = Model::init(spec, 43);
    CHECK(a.weights[0].data == b.weights[0].data);
    CHECK(a.weights[0].data != c.weights[0].data);
}
