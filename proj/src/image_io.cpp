#include "selfhdr/data.hpp"

#include "selfhdr/error.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace selfhdr {

namespace fs = std::filesystem;

ExposureImage read_ldr(const fs::path& path)
{
    if (!fs::exists(path)) throw DataError("missing image file: " + path.string());
    const cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (mat.empty()) throw DataError("cannot decode image: " + path.string());

    double scale = 0.0;
    int bit_depth = 8;
    if (mat.depth() == CV_8U) {
        scale = 1.0 / 255.0;
    } else if (mat.depth() == CV_16U) {
        scale = 1.0 / 65535.0;
        bit_depth = 16;
    } else {
        throw DataError("unsupported sample type (expected 8 or 16 bit): " + path.string());
    }
    const int channels = mat.channels();
    if (channels != 1 && channels != 3 && channels != 4) {
        throw DataError("unsupported channel count in " + path.string());
    }

    cv::Mat values;
    mat.convertTo(values, CV_64F, scale);
    Image out(mat.rows, mat.cols, 3);
    for (int y = 0; y < mat.rows; ++y) {
        const double* row = values.ptr<double>(y);
        for (int x = 0; x < mat.cols; ++x) {
            for (int c = 0; c < 3; ++c) {
                // OpenCV stores colour as BGR(A).
                const int src_c = channels == 1 ? 0 : 2 - c;
                out.at(c, y, x) = row[x * channels + src_c];
            }
        }
    }
    return ExposureImage{std::move(out), 0.0, bit_depth};
}

namespace {

cv::Mat to_mat(const Image& pixels, int bit_depth)
{
    if (pixels.channels() != 1 && pixels.channels() != 3) {
        throw InputError("only 1- or 3-channel images can be written as LDR files");
    }
    const bool wide = bit_depth == 16;
    const double levels = wide ? 65535.0 : 255.0;
    const int type = pixels.channels() == 1 ? (wide ? CV_16UC1 : CV_8UC1) : (wide ? CV_16UC3 : CV_8UC3);
    cv::Mat mat(pixels.height(), pixels.width(), type);
    for (int y = 0; y < pixels.height(); ++y) {
        for (int x = 0; x < pixels.width(); ++x) {
            for (int c = 0; c < pixels.channels(); ++c) {
                const int dst_c = pixels.channels() == 1 ? 0 : 2 - c;
                const double v = std::round(std::clamp(pixels.at(c, y, x), 0.0, 1.0) * levels);
                if (wide) {
                    mat.ptr<std::uint16_t>(y)[x * pixels.channels() + dst_c] = static_cast<std::uint16_t>(v);
                } else {
                    mat.ptr<std::uint8_t>(y)[x * pixels.channels() + dst_c] = static_cast<std::uint8_t>(v);
                }
            }
        }
    }
    return mat;
}

void write_mat(const fs::path& path, const cv::Mat& mat)
{
    bool ok = false;
    try {
        ok = cv::imwrite(path.string(), mat);
    } catch (const cv::Exception& e) {
        throw DataError("cannot write " + path.string() + ": " + e.what());
    }
    if (!ok) throw DataError("cannot write " + path.string());
}

} // namespace

void write_ldr(const fs::path& path, const Image& pixels, int bit_depth)
{
    if (bit_depth != 8 && bit_depth != 16) throw InputError("bit depth must be 8 or 16");
    write_mat(path, to_mat(pixels, bit_depth));
}

void write_png8(const fs::path& path, const Image& pixels)
{
    write_mat(path, to_mat(pixels, 8));
}

// --- RGBE ------------------------------------------------------------------

std::array<std::uint8_t, 4> encode_rgbe(double r, double g, double b)
{
    const double v = std::max({r, g, b});
    if (!(v > 1e-32)) return {0, 0, 0, 0};
    int e = 0;
    const double f = std::frexp(v, &e);
    if (e + 128 > 255) throw InputError("value too large for RGBE");
    if (e + 128 < 1) return {0, 0, 0, 0};
    const double scale = f * 256.0 / v;
    auto mant = [&](double c) {
        return static_cast<std::uint8_t>(std::clamp(std::floor(std::max(c, 0.0) * scale), 0.0, 255.0));
    };
    return {mant(r), mant(g), mant(b), static_cast<std::uint8_t>(e + 128)};
}

std::array<double, 3> decode_rgbe(const std::array<std::uint8_t, 4>& rgbe)
{
    if (rgbe[3] == 0) return {0.0, 0.0, 0.0};
    const double f = std::ldexp(1.0 / 256.0, static_cast<int>(rgbe[3]) - 128);
    return {rgbe[0] * f, rgbe[1] * f, rgbe[2] * f};
}

namespace {

std::string read_header_line(std::istream& in, const fs::path& path)
{
    std::string line;
    if (!std::getline(in, line)) throw DataError("truncated RGBE header: " + path.string());
    return line;
}

void read_scanline(std::istream& in, int width, std::vector<std::uint8_t>& line, const fs::path& path)
{
    auto fail = [&] { throw DataError("truncated RGBE scanline data: " + path.string()); };
    std::array<std::uint8_t, 4> head{};
    if (!in.read(reinterpret_cast<char*>(head.data()), 4)) fail();

    const bool rle = width >= 8 && width < 0x8000 && head[0] == 2 && head[1] == 2 && (head[2] & 0x80) == 0;
    if (!rle) {
        std::copy(head.begin(), head.end(), line.begin());
        if (width > 1 && !in.read(reinterpret_cast<char*>(line.data() + 4), static_cast<std::streamsize>(4) * (width - 1))) {
            fail();
        }
        return;
    }
    if (((head[2] << 8) | head[3]) != width) throw DataError("RGBE scanline width mismatch: " + path.string());

    std::vector<std::uint8_t> planar(static_cast<std::size_t>(width) * 4);
    for (int c = 0; c < 4; ++c) {
        std::uint8_t* dst = planar.data() + static_cast<std::size_t>(c) * width;
        int x = 0;
        while (x < width) {
            char count_byte = 0;
            if (!in.get(count_byte)) fail();
            int count = static_cast<std::uint8_t>(count_byte);
            if (count > 128) {
                count -= 128;
                char value = 0;
                if (!in.get(value)) fail();
                if (x + count > width) throw DataError("corrupt RGBE run: " + path.string());
                std::fill(dst + x, dst + x + count, static_cast<std::uint8_t>(value));
            } else {
                if (count == 0 || x + count > width) throw DataError("corrupt RGBE run: " + path.string());
                if (!in.read(reinterpret_cast<char*>(dst + x), count)) fail();
            }
            x += count;
        }
    }
    for (int x = 0; x < width; ++x) {
        for (int c = 0; c < 4; ++c) line[static_cast<std::size_t>(x) * 4 + c] = planar[static_cast<std::size_t>(c) * width + x];
    }
}

} // namespace

Image read_rgbe(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open RGBE file: " + path.string());

    const std::string magic = read_header_line(in, path);
    if (magic.rfind("#?RADIANCE", 0) != 0 && magic.rfind("#?RGBE", 0) != 0) {
        throw DataError("bad RGBE magic in " + path.string());
    }
    for (;;) {
        const std::string line = read_header_line(in, path);
        if (line.empty()) break;
        if (line.rfind("FORMAT=", 0) == 0 && line != "FORMAT=32-bit_rle_rgbe") {
            throw DataError("unsupported RGBE format '" + line + "' in " + path.string());
        }
    }
    const std::string res = read_header_line(in, path);
    std::istringstream rs(res);
    std::string ylabel, xlabel;
    int height = 0, width = 0;
    if (!(rs >> ylabel >> height >> xlabel >> width) || ylabel != "-Y" || xlabel != "+X" || height < 1 || width < 1) {
        throw DataError("unsupported RGBE resolution line '" + res + "' in " + path.string());
    }

    Image out(height, width, 3);
    std::vector<std::uint8_t> line(static_cast<std::size_t>(width) * 4);
    for (int y = 0; y < height; ++y) {
        read_scanline(in, width, line, path);
        for (int x = 0; x < width; ++x) {
            const std::size_t i = static_cast<std::size_t>(x) * 4;
            const auto rgb = decode_rgbe({line[i], line[i + 1], line[i + 2], line[i + 3]});
            for (int c = 0; c < 3; ++c) out.at(c, y, x) = rgb[c];
        }
    }
    return out;
}

void write_rgbe(const fs::path& path, const Image& rgb)
{
    if (rgb.channels() != 3) throw InputError("RGBE output needs 3 channels");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    out << "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y " << rgb.height() << " +X " << rgb.width() << "\n";
    // Flat (uncompressed) scanlines; every Radiance reader accepts them.
    for (int y = 0; y < rgb.height(); ++y) {
        for (int x = 0; x < rgb.width(); ++x) {
            const auto px = encode_rgbe(rgb.at(0, y, x), rgb.at(1, y, x), rgb.at(2, y, x));
            out.write(reinterpret_cast<const char*>(px.data()), 4);
        }
    }
    if (!out) throw DataError("write failed: " + path.string());
}

// --- native container --------------------------------------------------------

namespace {

void put_u32(std::ostream& out, std::uint32_t v)
{
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(const unsigned char* b)
{
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

} // namespace

void save_hdr_native(const fs::path& path, const Image& img)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    out.write("SHDR", 4);
    put_u32(out, kShdrVersion);
    put_u32(out, static_cast<std::uint32_t>(img.height()));
    put_u32(out, static_cast<std::uint32_t>(img.width()));
    put_u32(out, static_cast<std::uint32_t>(img.channels()));
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            for (int c = 0; c < img.channels(); ++c) {
                put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(img.at(c, y, x))));
            }
        }
    }
    if (!out) throw DataError("write failed: " + path.string());
}

Image load_hdr_native(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open SHDR file: " + path.string());
    unsigned char header[20];
    if (!in.read(reinterpret_cast<char*>(header), sizeof(header))) {
        throw DataError("truncated SHDR header: " + path.string());
    }
    if (std::memcmp(header, "SHDR", 4) != 0) throw DataError("bad SHDR magic in " + path.string());
    const std::uint32_t version = get_u32(header + 4);
    if (version != kShdrVersion) {
        throw DataError("unsupported SHDR version " + std::to_string(version) + " in " + path.string());
    }
    const std::uint32_t h = get_u32(header + 8);
    const std::uint32_t w = get_u32(header + 12);
    const std::uint32_t c = get_u32(header + 16);
    if (h == 0 || w == 0 || c == 0 || h > 1u << 16 || w > 1u << 16 || c > 1024) {
        throw DataError("implausible SHDR dimensions in " + path.string());
    }
    Image out(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
    std::vector<unsigned char> payload(static_cast<std::size_t>(h) * w * c * 4);
    if (!in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()))) {
        throw DataError("truncated SHDR payload: " + path.string());
    }
    std::size_t i = 0;
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            for (int ch = 0; ch < out.channels(); ++ch, i += 4) {
                out.at(ch, y, x) = std::bit_cast<float>(get_u32(payload.data() + i));
            }
        }
    }
    return out;
}

} // namespace selfhdr
