#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace selfhdr {

/// Dense planar (channel, row, column) image of doubles. Also used as the
/// activation tensor inside the networks.
class Image {
public:
    Image() = default;
    Image(int height, int width, int channels, double fill = 0.0);

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(height_) * width_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& at(int c, int y, int x) { return data_[index(c, y, x)]; }
    double at(int c, int y, int x) const { return data_[index(c, y, x)]; }

    std::span<double> plane(int c);
    std::span<const double> plane(int c) const;

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Image& other) const;
    bool same_spatial(const Image& other) const;

    /// Rows [y0, y0+h) and columns [x0, x0+w), all channels.
    Image crop(int y0, int x0, int h, int w) const;
    /// Channels [c0, c0+count).
    Image slice_channels(int c0, int count) const;
    /// Single-channel image holding the per-pixel mean over channels.
    Image channel_mean() const;

    double min_value() const;
    double max_value() const;
    bool all_finite() const;

private:
    std::size_t index(int c, int y, int x) const
    {
        return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
    }

    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

/// Channel-wise concatenation; all parts must share the spatial size.
Image concat_channels(std::span<const Image> parts);

/// Throws InputError naming `what` unless the two images share a shape.
void require_same_shape(const Image& a, const Image& b, const std::string& what);

/// Elementwise clamp into [lo, hi].
Image clamp(const Image& img, double lo, double hi);

} // namespace selfhdr
