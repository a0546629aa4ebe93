#include "selfhdr/nn.hpp"

#include "selfhdr/error.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <bit>
#include <cmath>

namespace selfhdr::nn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

// Column matrix of shape (C * k * k) x (H * W) for a "same" convolution.
void im2col(const Image& x, int kernel, int dilation, RowMatrix& cols)
{
    const int h = x.height();
    const int w = x.width();
    const int half = kernel / 2;
    cols.setZero(static_cast<Eigen::Index>(x.channels()) * kernel * kernel, static_cast<Eigen::Index>(h) * w);
    for (int c = 0; c < x.channels(); ++c) {
        for (int ky = 0; ky < kernel; ++ky) {
            for (int kx = 0; kx < kernel; ++kx) {
                const int row = (c * kernel + ky) * kernel + kx;
                const int oy = (ky - half) * dilation;
                const int ox = (kx - half) * dilation;
                double* dst = cols.row(row).data();
                for (int y = 0; y < h; ++y) {
                    const int sy = y + oy;
                    if (sy < 0 || sy >= h) continue;
                    const int x0 = std::max(0, -ox);
                    const int x1 = std::min(w, w - ox);
                    const double* src = x.plane(c).data() + static_cast<std::size_t>(sy) * w;
                    for (int xx = x0; xx < x1; ++xx) dst[y * w + xx] = src[xx + ox];
                }
            }
        }
    }
}

Image col2im(const RowMatrix& cols, int channels, int h, int w, int kernel, int dilation)
{
    Image out(h, w, channels);
    const int half = kernel / 2;
    for (int c = 0; c < channels; ++c) {
        for (int ky = 0; ky < kernel; ++ky) {
            for (int kx = 0; kx < kernel; ++kx) {
                const int row = (c * kernel + ky) * kernel + kx;
                const int oy = (ky - half) * dilation;
                const int ox = (kx - half) * dilation;
                const double* src = cols.row(row).data();
                for (int y = 0; y < h; ++y) {
                    const int sy = y + oy;
                    if (sy < 0 || sy >= h) continue;
                    const int x0 = std::max(0, -ox);
                    const int x1 = std::min(w, w - ox);
                    double* dst = &out.at(c, sy, 0);
                    for (int xx = x0; xx < x1; ++xx) dst[xx + ox] += src[y * w + xx];
                }
            }
        }
    }
    return out;
}

} // namespace

Conv2d::Conv2d(const std::string& name, int in, int out, int k, int dil)
    : in_channels(in), out_channels(out), kernel(k), dilation(dil),
      weight(name + ".weight", static_cast<std::size_t>(out) * in * k * k), bias(name + ".bias", static_cast<std::size_t>(out))
{
    if (in < 1 || out < 1 || k < 1 || k % 2 == 0 || dil < 1) throw InputError("invalid convolution shape");
}

void Conv2d::init(std::mt19937_64& rng, double gain)
{
    const double fan_in = static_cast<double>(in_channels) * kernel * kernel;
    std::normal_distribution<double> normal(0.0, gain * std::sqrt(2.0 / fan_in));
    for (double& v : weight.value) v = normal(rng);
    std::fill(bias.value.begin(), bias.value.end(), 0.0);
}

Image Conv2d::forward(const Image& x) const
{
    if (x.channels() != in_channels) {
        throw InputError("conv " + weight.name + ": expected " + std::to_string(in_channels) + " channels, got " +
                         std::to_string(x.channels()));
    }
    RowMatrix cols;
    im2col(x, kernel, dilation, cols);
    Image out(x.height(), x.width(), out_channels);
    const RowMatrix wmat = ConstMatrixMap(weight.value.data(), out_channels, cols.rows());
    RowMatrix prod = wmat * cols;
    for (int o = 0; o < out_channels; ++o) prod.row(o).array() += bias.value[o];
    MatrixMap(out.data().data(), out_channels, cols.cols()) = prod;
    return out;
}

Image Conv2d::backward(const Image& x, const Image& grad_out)
{
    RowMatrix cols;
    im2col(x, kernel, dilation, cols);
    const RowMatrix gmat = ConstMatrixMap(grad_out.data().data(), out_channels, cols.cols());
    const RowMatrix dw = gmat * cols.transpose();
    MatrixMap(weight.grad.data(), out_channels, cols.rows()) += dw;
    for (int o = 0; o < out_channels; ++o) bias.grad[o] += gmat.row(o).sum();

    const RowMatrix wmat = ConstMatrixMap(weight.value.data(), out_channels, cols.rows());
    const RowMatrix dcols = wmat.transpose() * gmat;
    return col2im(dcols, in_channels, x.height(), x.width(), kernel, dilation);
}

Image Conv2d::backward_input(const Image& x, const Image& grad_out) const
{
    const RowMatrix gmat = ConstMatrixMap(grad_out.data().data(), out_channels, static_cast<Eigen::Index>(x.pixel_count()));
    const RowMatrix wmat =
        ConstMatrixMap(weight.value.data(), out_channels, static_cast<Eigen::Index>(in_channels) * kernel * kernel);
    const RowMatrix dcols = wmat.transpose() * gmat;
    return col2im(dcols, in_channels, x.height(), x.width(), kernel, dilation);
}

Image leaky_relu(const Image& x, double slope)
{
    Image out = x;
    for (double& v : out.data()) v = v > 0.0 ? v : slope * v;
    return out;
}

Image leaky_relu_backward(const Image& x, const Image& grad, double slope)
{
    Image out = grad;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!(x.data()[i] > 0.0)) out.data()[i] *= slope;
    }
    return out;
}

Image sigmoid(const Image& x)
{
    Image out = x;
    for (double& v : out.data()) v = 1.0 / (1.0 + std::exp(-v));
    return out;
}

Image sigmoid_backward(const Image& s, const Image& grad)
{
    Image out = grad;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = s.data()[i];
        out.data()[i] *= v * (1.0 - v);
    }
    return out;
}

Image avg_pool2(const Image& x)
{
    const int h = x.height() / 2;
    const int w = x.width() / 2;
    Image out(h, w, x.channels());
    for (int c = 0; c < x.channels(); ++c) {
        for (int y = 0; y < h; ++y) {
            for (int xx = 0; xx < w; ++xx) {
                out.at(c, y, xx) = 0.25 * (x.at(c, 2 * y, 2 * xx) + x.at(c, 2 * y, 2 * xx + 1) +
                                           x.at(c, 2 * y + 1, 2 * xx) + x.at(c, 2 * y + 1, 2 * xx + 1));
            }
        }
    }
    return out;
}

Image avg_pool2_backward(const Image& grad, int height, int width)
{
    Image out(height, width, grad.channels());
    for (int c = 0; c < grad.channels(); ++c) {
        for (int y = 0; y < grad.height(); ++y) {
            for (int x = 0; x < grad.width(); ++x) {
                const double g = 0.25 * grad.at(c, y, x);
                out.at(c, 2 * y, 2 * x) += g;
                out.at(c, 2 * y, 2 * x + 1) += g;
                out.at(c, 2 * y + 1, 2 * x) += g;
                out.at(c, 2 * y + 1, 2 * x + 1) += g;
            }
        }
    }
    return out;
}

Image add(const Image& a, const Image& b)
{
    Image out = a;
    add_inplace(out, b);
    return out;
}

void add_inplace(Image& a, const Image& b)
{
    require_same_shape(a, b, "add");
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += b.data()[i];
}

Image multiply(const Image& a, const Image& b)
{
    require_same_shape(a, b, "multiply");
    Image out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= b.data()[i];
    return out;
}

Adam::Adam(std::vector<Parameter*> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps)
{
    for (const Parameter* p : params_) {
        m_.emplace_back(p->value.size(), 0.0);
        v_.emplace_back(p->value.size(), 0.0);
    }
}

void Adam::step(double lr)
{
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Parameter& p = *params_[k];
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad[i];
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
            p.value[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
        }
    }
}

std::uint64_t hash_parameters(const std::vector<const Parameter*>& params)
{
    std::uint64_t h = 1469598103934665603ULL;
    for (const Parameter* p : params) {
        for (double v : p->value) {
            auto bits = std::bit_cast<std::uint64_t>(v);
            for (int b = 0; b < 8; ++b) {
                h ^= (bits >> (8 * b)) & 0xffU;
                h *= 1099511628211ULL;
            }
        }
    }
    return h;
}

} // namespace selfhdr::nn
