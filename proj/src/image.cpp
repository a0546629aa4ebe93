#include "selfhdr/image.hpp"

#include "selfhdr/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace selfhdr {

Image::Image(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels)
{
    if (height < 0 || width < 0 || channels < 0) {
        throw InputError("image dimensions must be non-negative");
    }
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

std::span<double> Image::plane(int c)
{
    return {data_.data() + static_cast<std::size_t>(c) * pixel_count(), pixel_count()};
}

std::span<const double> Image::plane(int c) const
{
    return {data_.data() + static_cast<std::size_t>(c) * pixel_count(), pixel_count()};
}

bool Image::same_shape(const Image& other) const
{
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
}

bool Image::same_spatial(const Image& other) const
{
    return height_ == other.height_ && width_ == other.width_;
}

Image Image::crop(int y0, int x0, int h, int w) const
{
    if (y0 < 0 || x0 < 0 || h < 1 || w < 1 || y0 + h > height_ || x0 + w > width_) {
        throw InputError("crop window outside image");
    }
    Image out(h, w, channels_);
    for (int c = 0; c < channels_; ++c) {
        for (int y = 0; y < h; ++y) {
            const double* src = &data_[index(c, y0 + y, x0)];
            std::copy(src, src + w, &out.at(c, y, 0));
        }
    }
    return out;
}

Image Image::slice_channels(int c0, int count) const
{
    if (c0 < 0 || count < 1 || c0 + count > channels_) {
        throw InputError("channel slice outside image");
    }
    Image out(height_, width_, count);
    auto first = data_.begin() + static_cast<std::ptrdiff_t>(c0 * pixel_count());
    std::copy(first, first + static_cast<std::ptrdiff_t>(count * pixel_count()), out.data_.begin());
    return out;
}

Image Image::channel_mean() const
{
    Image out(height_, width_, 1);
    if (channels_ == 0) return out;
    for (int c = 0; c < channels_; ++c) {
        auto src = plane(c);
        auto dst = out.plane(0);
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
    }
    for (double& v : out.data_) v /= channels_;
    return out;
}

double Image::min_value() const
{
    if (data_.empty()) return std::numeric_limits<double>::quiet_NaN();
    return *std::min_element(data_.begin(), data_.end());
}

double Image::max_value() const
{
    if (data_.empty()) return std::numeric_limits<double>::quiet_NaN();
    return *std::max_element(data_.begin(), data_.end());
}

bool Image::all_finite() const
{
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Image concat_channels(std::span<const Image> parts)
{
    if (parts.empty()) throw InputError("concat_channels: no inputs");
    int channels = 0;
    for (const auto& p : parts) {
        if (!p.same_spatial(parts.front())) {
            throw InputError("concat_channels: spatial size mismatch");
        }
        channels += p.channels();
    }
    Image out(parts.front().height(), parts.front().width(), channels);
    auto dst = out.data().begin();
    for (const auto& p : parts) dst = std::copy(p.data().begin(), p.data().end(), dst);
    return out;
}

void require_same_shape(const Image& a, const Image& b, const std::string& what)
{
    if (!a.same_shape(b)) {
        throw InputError(what + ": shape mismatch (" + std::to_string(a.height()) + "x" +
                         std::to_string(a.width()) + "x" + std::to_string(a.channels()) + " vs " +
                         std::to_string(b.height()) + "x" + std::to_string(b.width()) + "x" +
                         std::to_string(b.channels()) + ")");
    }
}

Image clamp(const Image& img, double lo, double hi)
{
    Image out = img;
    for (double& v : out.data()) v = std::clamp(v, lo, hi);
    return out;
}

} // namespace selfhdr
