#include "selfhdr/data.hpp"

#include "selfhdr/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace selfhdr {

namespace fs = std::filesystem;

std::vector<double> parse_exposures(const std::string& text)
{
    // U+2212 MINUS SIGN is common in hand-written exposure files.
    std::string normalized;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text.compare(i, 3, "\xE2\x88\x92") == 0) {
            normalized += '-';
            i += 2;
        } else {
            normalized += text[i] == ',' ? ' ' : text[i];
        }
    }
    std::istringstream in(normalized);
    std::vector<double> evs;
    std::string token;
    while (in >> token) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(token, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != token.size() || !std::isfinite(v)) {
            throw DataError("cannot parse exposure value '" + token + "'");
        }
        evs.push_back(v);
    }
    return evs;
}

namespace {

fs::path find_frame(const fs::path& dir, int index)
{
    for (const char* ext : {".png", ".tif", ".tiff", ".PNG", ".TIF", ".TIFF"}) {
        const fs::path p = dir / ("ldr_" + std::to_string(index) + ext);
        if (fs::exists(p)) return p;
    }
    throw DataError("scene " + dir.string() + ": missing frame file ldr_" + std::to_string(index) +
                    ".png (or .tif)");
}

std::string read_text(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw DataError("missing file: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

Scene load_scene(const fs::path& dir)
{
    if (!fs::is_directory(dir)) throw DataError("scene directory not found: " + dir.string());
    Scene scene;
    scene.id = dir.filename().string();

    const auto evs = parse_exposures(read_text(dir / "exposures.txt"));
    if (evs.size() != 3) {
        throw DataError("scene " + dir.string() + ": exposures.txt must list 3 values, found " +
                        std::to_string(evs.size()));
    }
    if (!(evs[0] < evs[1] && evs[1] < evs[2])) {
        throw DataError("scene " + dir.string() + ": exposure values must be strictly increasing");
    }
    for (int k = 0; k < 3; ++k) {
        scene.frames[k] = read_ldr(find_frame(dir, k + 1));
        scene.frames[k].ev = evs[k];
        if (!scene.frames[k].pixels.same_shape(scene.frames[0].pixels)) {
            throw DataError("scene " + dir.string() + ": frame ldr_" + std::to_string(k + 1) +
                            " has a different size");
        }
    }

    if (fs::exists(dir / "gt.shdr")) {
        scene.ground_truth = HdrImage{load_hdr_native(dir / "gt.shdr"), HdrRole::ground_truth};
    } else if (fs::exists(dir / "gt.hdr")) {
        // Values above the reference saturation level are clipped into the
        // normalized [0,1] domain.
        scene.ground_truth = HdrImage{clamp(read_rgbe(dir / "gt.hdr"), 0.0, 1.0), HdrRole::ground_truth};
    }
    if (fs::exists(dir / "flow_1.shdr") && fs::exists(dir / "flow_3.shdr")) {
        scene.true_flows = std::array<FlowField, 2>{FlowField{load_hdr_native(dir / "flow_1.shdr")},
                                                    FlowField{load_hdr_native(dir / "flow_3.shdr")}};
    }
    if (fs::exists(dir / "motion_mask.shdr")) scene.motion_mask = load_hdr_native(dir / "motion_mask.shdr");
    scene.validate();
    return scene;
}

void save_scene(const fs::path& dir, const Scene& scene)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw DataError("cannot create directory " + dir.string());

    for (int k = 0; k < 3; ++k) {
        write_ldr(dir / ("ldr_" + std::to_string(k + 1) + ".png"), scene.frames[k].pixels, scene.frames[k].bit_depth);
    }
    std::ofstream ev(dir / "exposures.txt");
    if (!ev) throw DataError("cannot write " + (dir / "exposures.txt").string());
    for (const auto& f : scene.frames) ev << f.ev << "\n";
    ev.close();

    if (scene.ground_truth) save_hdr_native(dir / "gt.shdr", scene.ground_truth->pixels);
    if (scene.true_flows) {
        save_hdr_native(dir / "flow_1.shdr", (*scene.true_flows)[0].vectors);
        save_hdr_native(dir / "flow_3.shdr", (*scene.true_flows)[1].vectors);
    }
    if (scene.motion_mask) save_hdr_native(dir / "motion_mask.shdr", *scene.motion_mask);
}

std::vector<fs::path> list_scene_dirs(const fs::path& root)
{
    if (!fs::is_directory(root)) throw DataError("dataset directory not found: " + root.string());
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory() && fs::exists(entry.path() / "exposures.txt")) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    return dirs;
}

} // namespace selfhdr
