#include "selfhdr/alignment.hpp"
#include "selfhdr/data.hpp"
#include "selfhdr/error.hpp"
#include "selfhdr/losses.hpp"
#include "selfhdr/metrics.hpp"
#include "selfhdr/models.hpp"
#include "selfhdr/radiometry.hpp"
#include "selfhdr/supervision.hpp"
#include "selfhdr/training.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <array>

namespace py = pybind11;
using namespace selfhdr;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// numpy arrays are H x W x C; images are stored planar.
Image to_image(const Array& a)
{
    if (a.ndim() != 2 && a.ndim() != 3) throw InputError("expected an H x W or H x W x C array");
    const int h = static_cast<int>(a.shape(0));
    const int w = static_cast<int>(a.shape(1));
    const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
    Image img(h, w, c);
    const double* src = a.data();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int k = 0; k < c; ++k) img.at(k, y, x) = src[(static_cast<std::size_t>(y) * w + x) * c + k];
    return img;
}

Array to_array(const Image& img)
{
    Array out({img.height(), img.width(), img.channels()});
    double* dst = out.mutable_data();
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            for (int k = 0; k < img.channels(); ++k)
                dst[(static_cast<std::size_t>(y) * img.width() + x) * img.channels() + k] = img.at(k, y, x);
    return out;
}

std::array<ExposureImage, 3> to_stack(const std::array<Array, 3>& frames, const std::array<double, 3>& evs)
{
    std::array<ExposureImage, 3> stack;
    for (int k = 0; k < 3; ++k) stack[k] = ExposureImage{to_image(frames[k]), evs[k], 8};
    return stack;
}

py::dict scene_dict(const Scene& s)
{
    py::dict d;
    d["id"] = s.id;
    py::list frames;
    py::list evs;
    for (const auto& f : s.frames) {
        frames.append(to_array(f.pixels));
        evs.append(f.ev);
    }
    d["frames"] = frames;
    d["evs"] = evs;
    d["ground_truth"] = s.ground_truth ? py::object(to_array(s.ground_truth->pixels)) : py::none();
    d["motion_mask"] = s.motion_mask ? py::object(to_array(*s.motion_mask)) : py::none();
    return d;
}

} // namespace

PYBIND11_MODULE(_selfhdr, m)
{
    m.doc() = "Self-supervised multi-exposure HDR reconstruction";

    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    py::class_<RadiometryConfig>(m, "RadiometryConfig")
        .def(py::init<>())
        .def_readwrite("gamma", &RadiometryConfig::gamma)
        .def_readwrite("mu", &RadiometryConfig::mu)
        .def_readwrite("triangle_peak", &RadiometryConfig::triangle_peak);

    m.def(
        "linearize",
        [](const Array& ldr, double ev, double reference_ev, const RadiometryConfig& cfg) {
            return to_array(linearize(ExposureImage{to_image(ldr), ev, 8}, reference_ev, cfg).pixels);
        },
        py::arg("ldr"), py::arg("ev"), py::arg("reference_ev") = 0.0, py::arg("cfg") = RadiometryConfig{});
    m.def(
        "tonemap", [](const Array& h, const RadiometryConfig& cfg) { return to_array(tonemap(to_image(h), cfg)); },
        py::arg("hdr"), py::arg("cfg") = RadiometryConfig{});
    m.def(
        "fusion_weights",
        [](const Array& i2, const RadiometryConfig& cfg) {
            const auto w = fusion_weights(ExposureImage{to_image(i2), 0.0, 8}, cfg);
            return py::make_tuple(to_array(w[0].values), to_array(w[1].values), to_array(w[2].values));
        },
        py::arg("i2"), py::arg("cfg") = RadiometryConfig{});
    m.def(
        "fuse_color",
        [](const Array& h1, const Array& h2, const Array& h3, const Array& i2, const RadiometryConfig& cfg) {
            return to_array(fuse_color({to_image(h1), 0.0}, {to_image(h2), 0.0}, {to_image(h3), 0.0},
                                       ExposureImage{to_image(i2), 0.0, 8}, cfg)
                                .pixels);
        },
        py::arg("h1"), py::arg("h2"), py::arg("h3"), py::arg("i2"), py::arg("cfg") = RadiometryConfig{});

    py::class_<FlowEstimatorSpec>(m, "FlowEstimatorSpec")
        .def(py::init<>())
        .def_readwrite("algorithm", &FlowEstimatorSpec::algorithm)
        .def_readwrite("levels", &FlowEstimatorSpec::levels)
        .def_readwrite("iterations", &FlowEstimatorSpec::iterations)
        .def_readwrite("smoothness", &FlowEstimatorSpec::smoothness)
        .def_readwrite("window_radius", &FlowEstimatorSpec::window_radius);

    m.def(
        "estimate_flow",
        [](const Array& ref, const Array& src, const FlowEstimatorSpec& spec) {
            return to_array(make_flow_estimator(spec)->estimate(to_image(ref), to_image(src)).vectors);
        },
        py::arg("ref"), py::arg("src"), py::arg("spec") = FlowEstimatorSpec{},
        "Flow (H x W x 2, dx then dy) such that warp(src, flow) approximates ref.");
    m.def(
        "warp", [](const Array& src, const Array& flow) { return to_array(warp(to_image(src), FlowField{to_image(flow)})); },
        py::arg("src"), py::arg("flow"));

    m.def(
        "synthesize_scene",
        [](const std::string& motion, int size, double max_displacement, std::uint64_t seed) {
            return scene_dict(synthesize_scene(random_synthetic_spec(parse_motion_kind(motion), size, max_displacement, seed)));
        },
        py::arg("motion") = "none", py::arg("size") = 64, py::arg("max_displacement") = 5.0, py::arg("seed") = 0);
    m.def(
        "load_scene", [](const std::filesystem::path& dir) { return scene_dict(load_scene(dir)); }, py::arg("dir"));

    m.def(
        "build_supervision",
        [](const std::array<Array, 3>& frames, const std::array<double, 3>& evs, const FlowEstimatorSpec& spec) {
            Scene scene;
            scene.frames = to_stack(frames, evs);
            const auto sup = build_scene_supervision(scene, *make_flow_estimator(spec));
            py::dict d;
            d["y_color"] = to_array(sup.y_color.pixels);
            d["m_sp"] = to_array(sup.m_sp.values);
            d["m_se"] = to_array(sup.m_se.values);
            return d;
        },
        py::arg("frames"), py::arg("evs") = std::array<double, 3>{-2.0, 0.0, 2.0},
        py::arg("spec") = FlowEstimatorSpec{});

    m.def(
        "psnr_u", [](const Array& a, const Array& b) { return psnr_u(to_image(a), to_image(b)); }, py::arg("prediction"),
        py::arg("ground_truth"));
    m.def(
        "psnr_l", [](const Array& a, const Array& b) { return psnr_l(to_image(a), to_image(b)); }, py::arg("prediction"),
        py::arg("ground_truth"));
    m.def(
        "ssim", [](const Array& a, const Array& b) { return ssim(to_image(a), to_image(b)); }, py::arg("a"), py::arg("b"));

    py::class_<Model>(m, "Model")
        .def_static(
            "load", [](const std::filesystem::path& path) { return load_params(path); }, py::arg("path"))
        .def("save", [](const Model& model, const std::filesystem::path& path) { save_params(model, path); })
        .def("parameter_count", &Model::parameter_count)
        .def("parameter_hash", &Model::parameter_hash)
        .def(
            "infer",
            [](const Model& model, const std::array<Array, 3>& frames, const std::array<double, 3>& evs) {
                return to_array(infer(model, to_stack(frames, evs)).pixels);
            },
            py::arg("frames"), py::arg("evs") = std::array<double, 3>{-2.0, 0.0, 2.0});

    m.def(
        "build_model",
        [](int width, int blocks, bool attention, std::uint64_t seed) {
            ModelSpec spec;
            spec.width = width;
            spec.blocks = blocks;
            spec.attention = attention;
            spec.seed = seed;
            return build_model(spec);
        },
        py::arg("width") = 8, py::arg("blocks") = 2, py::arg("attention") = true, py::arg("seed") = 0);

    m.def(
        "read_rgbe", [](const std::filesystem::path& path) { return to_array(read_rgbe(path)); }, py::arg("path"));
    m.def(
        "write_rgbe", [](const std::filesystem::path& path, const Array& rgb) { write_rgbe(path, to_image(rgb)); },
        py::arg("path"), py::arg("rgb"));
}
