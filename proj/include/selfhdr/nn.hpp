#pragma once

#include "selfhdr/image.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace selfhdr::nn {

struct Parameter {
    std::string name;
    std::vector<double> value;
    std::vector<double> grad;

    Parameter() = default;
    Parameter(std::string name, std::size_t size) : name(std::move(name)), value(size, 0.0), grad(size, 0.0) {}

    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

/// Zero-padded "same" 2-D convolution with square kernels and dilation.
struct Conv2d {
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 3;
    int dilation = 1;
    Parameter weight; ///< out x (in * kernel * kernel), row-major
    Parameter bias;   ///< out

    Conv2d() = default;
    Conv2d(const std::string& name, int in_channels, int out_channels, int kernel = 3, int dilation = 1);

    /// He-normal weights scaled by `gain`, zero bias.
    void init(std::mt19937_64& rng, double gain = 1.0);

    Image forward(const Image& x) const;
    /// Accumulates weight/bias gradients; returns the gradient w.r.t. `x`.
    Image backward(const Image& x, const Image& grad_out);
    /// Gradient w.r.t. `x` only; parameters untouched.
    Image backward_input(const Image& x, const Image& grad_out) const;
};

Image leaky_relu(const Image& x, double slope);
/// grad * d/dx leaky_relu evaluated at the pre-activation `x`.
Image leaky_relu_backward(const Image& x, const Image& grad, double slope);

Image sigmoid(const Image& x);
/// grad * s (1 - s) given the sigmoid output `s`.
Image sigmoid_backward(const Image& s, const Image& grad);

/// 2x2 average pooling; odd trailing rows/columns are dropped.
Image avg_pool2(const Image& x);
Image avg_pool2_backward(const Image& grad, int height, int width);

Image add(const Image& a, const Image& b);
void add_inplace(Image& a, const Image& b);
Image multiply(const Image& a, const Image& b);

/// Adam with bias correction.
class Adam {
public:
    Adam(std::vector<Parameter*> params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void step(double lr);
    long steps() const { return t_; }

private:
    std::vector<Parameter*> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    double beta1_;
    double beta2_;
    double eps_;
    long t_ = 0;
};

/// FNV-1a over the raw bytes of every parameter value.
std::uint64_t hash_parameters(const std::vector<const Parameter*>& params);

} // namespace selfhdr::nn
