#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "restain/image.hpp"

namespace restain::nn {

// Dense NCHW tensor of 64-bit floats. Biases and scalars use degenerate
// dims (e.g. 1x16x1x1); there is no separate rank-1 representation.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_), data(checked_size(n_, c_, h_, w_), 0.0) {}

    std::size_t size() const { return data.size(); }

    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    double& at(int ni, int ci, int hi, int wi) {
        return data[((static_cast<std::size_t>(ni) * c + ci) * h + hi) * w + wi];
    }
    double at(int ni, int ci, int hi, int wi) const {
        return data[((static_cast<std::size_t>(ni) * c + ci) * h + hi) * w + wi];
    }

    // Start of the contiguous row (ni, ci, hi, *).
    double* row(int ni, int ci, int hi) {
        return data.data() + ((static_cast<std::size_t>(ni) * c + ci) * h + hi) * w;
    }
    const double* row(int ni, int ci, int hi) const {
        return data.data() + ((static_cast<std::size_t>(ni) * c + ci) * h + hi) * w;
    }

    std::string shape_str() const {
        return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
               std::to_string(w);
    }

private:
    // Validated before the data vector is sized, so bad dims surface as a
    // library Error instead of a std::length_error from the allocator.
    static std::size_t checked_size(int n_, int c_, int h_, int w_) {
        if (n_ < 1 || c_ < 1 || h_ < 1 || w_ < 1)
            throw Error("tensor dims must be positive");
        return static_cast<std::size_t>(n_) * c_ * h_ * w_;
    }
};

} // namespace restain::nn
