#pragma once

#include "selfhdr/image.hpp"
#include "selfhdr/radiometry.hpp"

#include <array>
#include <memory>
#include <string>

namespace selfhdr {

/// Per-pixel displacement from the reference frame to a source frame.
/// Channel 0 holds x, channel 1 holds y, in pixels.
struct FlowField {
    Image vectors;

    static FlowField zeros(int height, int width);
    static FlowField constant(int height, int width, double dx, double dy);

    int height() const { return vectors.height(); }
    int width() const { return vectors.width(); }
    double dx(int y, int x) const { return vectors.at(0, y, x); }
    double dy(int y, int x) const { return vectors.at(1, y, x); }
};

struct FlowEstimatorSpec {
    /// "pyramidal_lk" or "zero".
    std::string algorithm = "pyramidal_lk";
    int levels = 4;
    int iterations = 6;
    /// Weight of the neighbourhood average blended into the flow after each update.
    double smoothness = 2.0;
    int window_radius = 3;

    void validate() const;
};

class FlowEstimator {
public:
    virtual ~FlowEstimator() = default;
    /// Flow such that warp(src, flow) approximates ref.
    virtual FlowField estimate(const Image& ref, const Image& src) const = 0;
};

std::unique_ptr<FlowEstimator> make_flow_estimator(const FlowEstimatorSpec& spec);

/// Coarse-to-fine dense Lucas-Kanade on the channel mean of the inputs.
class PyramidalLucasKanade final : public FlowEstimator {
public:
    explicit PyramidalLucasKanade(FlowEstimatorSpec spec);
    FlowField estimate(const Image& ref, const Image& src) const override;

private:
    FlowEstimatorSpec spec_;
};

/// Always returns zero flow; disables pre-alignment.
class ZeroFlow final : public FlowEstimator {
public:
    FlowField estimate(const Image& ref, const Image& src) const override;
};

/// Re-renders `src` as if captured at `target_ev`.
ExposureImage exposure_compensate(const ExposureImage& src, double target_ev, const RadiometryConfig& cfg);

FlowField estimate_flow(const ExposureImage& ref, const ExposureImage& src, const FlowEstimatorSpec& spec);

/// Backward bilinear warp: out(p) = src(p + flow(p)), border replicated.
Image warp(const Image& src, const FlowField& flow);

/// Bilinear sample of one channel with border replication.
double sample_bilinear(const Image& img, int c, double y, double x);

struct AlignedStack {
    std::array<ExposureImage, 3> ldr;  ///< I~1, I2, I~3
    std::array<LinearImage, 3> linear; ///< H~1, H2, H~3
    std::array<FlowField, 2> flows;    ///< reference -> frame 1, reference -> frame 3
};

/// Aligns frames 1 and 3 to frame 2. Frame 2 passes through untouched.
AlignedStack align_stack(const std::array<ExposureImage, 3>& stack, const FlowEstimator& estimator,
                         const RadiometryConfig& cfg);

} // namespace selfhdr
