#pragma once

#include "selfhdr/alignment.hpp"
#include "selfhdr/image.hpp"
#include "selfhdr/radiometry.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace selfhdr {

/// Three exposures of one scene, ordered by increasing exposure value.
struct Scene {
    std::string id;
    std::array<ExposureImage, 3> frames;
    std::optional<HdrImage> ground_truth;
    /// Synthetic only: true flow from the reference to frames 1 and 3.
    std::optional<std::array<FlowField, 2>> true_flows;
    /// Synthetic only: 1 where any frame differs from the reference geometry.
    std::optional<Image> motion_mask;

    void validate() const;
};

enum class MotionKind { none, global_shift, moving_rect };

MotionKind parse_motion_kind(const std::string& name);
std::string to_string(MotionKind kind);

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

struct SyntheticSpec {
    int height = 64;
    int width = 64;
    std::array<double, 3> evs{-2.0, 0.0, 2.0};
    MotionKind motion = MotionKind::none;
    /// Content displacement of frames 1 and 3 relative to the reference.
    Vec2 displacement1{};
    Vec2 displacement3{};
    /// Moving rectangle in reference coordinates; chosen from the seed when width is 0.
    double rect_x = 0.0;
    double rect_y = 0.0;
    double rect_w = 0.0;
    double rect_h = 0.0;
    int bit_depth = 8;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Renders a scene with known ground truth by inverting the camera model per frame.
Scene synthesize_scene(const SyntheticSpec& spec, const RadiometryConfig& cfg = {});

/// Draws a spec with random displacements (at most `max_displacement` px) for `kind`.
SyntheticSpec random_synthetic_spec(MotionKind kind, int size, double max_displacement, std::uint64_t seed);

// --- scene directories -----------------------------------------------------

/// Reads ldr_{1,2,3}.{png,tif,tiff}, exposures.txt and optional gt.shdr / gt.hdr.
Scene load_scene(const std::filesystem::path& dir);
/// Writes a scene directory including ground truth and synthetic sidecars.
void save_scene(const std::filesystem::path& dir, const Scene& scene);
/// Sorted scene directories (those holding exposures.txt) under `root`.
std::vector<std::filesystem::path> list_scene_dirs(const std::filesystem::path& root);

/// Parses whitespace-separated exposure values; accepts U+2212 as a minus sign.
std::vector<double> parse_exposures(const std::string& text);

// --- image files -----------------------------------------------------------

/// 8- or 16-bit PNG/TIFF, normalized to [0,1]; grayscale expands to 3 channels.
ExposureImage read_ldr(const std::filesystem::path& path);
void write_ldr(const std::filesystem::path& path, const Image& pixels, int bit_depth);
/// 8-bit PNG of a 1- or 3-channel image clipped to [0,1].
void write_png8(const std::filesystem::path& path, const Image& pixels);

/// Radiance RGBE. Decodes (m/256) * 2^(e-128); e = 0 is black.
Image read_rgbe(const std::filesystem::path& path);
void write_rgbe(const std::filesystem::path& path, const Image& rgb);
std::array<std::uint8_t, 4> encode_rgbe(double r, double g, double b);
std::array<double, 3> decode_rgbe(const std::array<std::uint8_t, 4>& rgbe);

/// Native float container: "SHDR", u32 version, u32 H, W, C, then H*W*C
/// little-endian float32 values in row-major (y, x, c) order.
void save_hdr_native(const std::filesystem::path& path, const Image& img);
Image load_hdr_native(const std::filesystem::path& path);

inline constexpr std::uint32_t kShdrVersion = 1;

} // namespace selfhdr
