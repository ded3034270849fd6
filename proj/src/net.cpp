#include "fstack/net.hpp"

namespace fstack::nn {

int ModelSpec::validate() const {
    if (input_channels <= 0 || input_height <= 0 || input_width <= 0) {
        throw ShapeError("model input shape must be positive");
    }
    if (layers.empty()) throw ShapeError("model needs at least one layer");
    int c = input_channels, h = input_height, w = input_width;
    bool flat = false;
    int flat_dim = 0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerDesc& l = layers[i];
        switch (l.kind) {
            case LayerDesc::Kind::Conv:
                if (flat) throw ShapeError("conv after flatten in " + layer_name(i));
                if (l.out <= 0) throw ShapeError("conv needs positive channels");
                c = l.out;
                break;
            case LayerDesc::Kind::Pool:
                if (flat) throw ShapeError("pool after flatten in " + layer_name(i));
                if (h % 2 != 0 || w % 2 != 0) {
                    throw ShapeError("odd spatial dims (" + std::to_string(h) +
                                     "x" + std::to_string(w) + ") into " +
                                     layer_name(i));
                }
                h /= 2;
                w /= 2;
                break;
            case LayerDesc::Kind::Flatten:
                if (flat) throw ShapeError("repeated flatten");
                flat = true;
                flat_dim = c * h * w;
                break;
            case LayerDesc::Kind::Dense:
                if (!flat) throw ShapeError("dense before flatten in " + layer_name(i));
                if (l.out <= 0) throw ShapeError("dense needs positive width");
                flat_dim = l.out;
                break;
        }
    }
    if (!flat) throw ShapeError("model must end in flatten + dense layers");
    return flat_dim;
}

ModelSpec ModelSpec::cnn6(int input_channels, int input_height, int input_width,
                          int output_dim, std::array<int, 6> conv_channels,
                          int hidden) {
    ModelSpec spec;
    spec.input_channels = input_channels;
    spec.input_height = input_height;
    spec.input_width = input_width;
    using K = LayerDesc::Kind;
    spec.layers = {
        {K::Conv, conv_channels[0], true},
        {K::Conv, conv_channels[1], true},
        {K::Pool},
        {K::Conv, conv_channels[2], true},
        {K::Pool},
        {K::Conv, conv_channels[3], true},
        {K::Pool},
        {K::Conv, conv_channels[4], true},
        {K::Pool},
        {K::Conv, conv_channels[5], true},
        {K::Flatten},
        {K::Dense, hidden, true},
        {K::Dense, output_dim, false},
    };
    const int out = spec.validate();
    if (out != output_dim) {
        throw ShapeError("cnn6 output dim bookkeeping failed");
    }
    return spec;
}

std::string ModelSpec::layer_name(std::size_t index) const {
    int counts[4] = {0, 0, 0, 0};
    for (std::size_t i = 0; i <= index && i < layers.size(); ++i) {
        ++counts[static_cast<int>(layers[i].kind)];
    }
    static const char* names[4] = {"conv", "pool", "flatten", "dense"};
    const int k = static_cast<int>(layers.at(index).kind);
    return names[k] + std::to_string(counts[k]);
}

}  // namespace fstack::nn
