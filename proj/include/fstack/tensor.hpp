#pragma once

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "fstack/errors.hpp"

namespace fstack::nn {

/// Dense n-dimensional array, row-major. Templated on the scalar type so the
/// gradient checks can run the exact same code in 64-bit.
template <typename T>
struct TensorT {
    std::vector<int> shape;
    std::vector<T> data;

    static TensorT zeros(std::vector<int> shape) {
        TensorT t;
        std::size_t n = 1;
        for (int d : shape) {
            if (d <= 0) throw ShapeError("tensor extents must be positive");
            n *= static_cast<std::size_t>(d);
        }
        t.shape = std::move(shape);
        t.data.assign(n, T{0});
        return t;
    }

    std::size_t numel() const { return data.size(); }

    int dim(std::size_t i) const { return shape.at(i); }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }
};

using Tensor = TensorT<float>;

}  // namespace fstack::nn
