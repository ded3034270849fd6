#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fstack/bench.hpp"
#include "fstack/dataset.hpp"
#include "fstack/focus.hpp"
#include "fstack/image.hpp"
#include "fstack/lens.hpp"
#include "fstack/preprocess.hpp"
#include "fstack/train.hpp"

namespace py = pybind11;
using namespace fstack;

namespace {

// numpy (H, W, 3) uint8 <-> Image
Image image_from_array(const py::array_t<std::uint8_t>& arr) {
    const auto buf = arr.request();
    if (buf.ndim != 3 || buf.shape[2] != 3) {
        throw ShapeError("expected an (H, W, 3) uint8 array");
    }
    Image img = Image::create(static_cast<int>(buf.shape[1]),
                              static_cast<int>(buf.shape[0]));
    const auto view = arr.unchecked<3>();
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = view(y, x, c);
        }
    }
    return img;
}

py::array_t<std::uint8_t> image_to_array(const Image& img) {
    py::array_t<std::uint8_t> arr({img.height, img.width, 3});
    auto view = arr.mutable_unchecked<3>();
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < 3; ++c) view(y, x, c) = img.at(x, y, c);
        }
    }
    return arr;
}

DepthMap depth_from_array(const py::array_t<float>& arr) {
    const auto buf = arr.request();
    if (buf.ndim != 2) throw ShapeError("expected an (H, W) float32 array");
    DepthMap d = DepthMap::create(static_cast<int>(buf.shape[1]),
                                  static_cast<int>(buf.shape[0]), 0.0f);
    const auto view = arr.unchecked<2>();
    for (int y = 0; y < d.height; ++y) {
        for (int x = 0; x < d.width; ++x) d.at(x, y) = view(y, x);
    }
    return d;
}

py::array_t<float> depth_to_array(const DepthMap& d) {
    py::array_t<float> arr({d.height, d.width});
    auto view = arr.mutable_unchecked<2>();
    for (int y = 0; y < d.height; ++y) {
        for (int x = 0; x < d.width; ++x) view(y, x) = d.at(x, y);
    }
    return arr;
}

LensConfig lens_from_kwargs(double focal_length_mm, double f_number,
                            double pixel_pitch_mm,
                            std::pair<double, double> sensor_range) {
    LensConfig lens;
    lens.focal_length_mm = focal_length_mm;
    lens.f_number = f_number;
    lens.pixel_pitch_mm = pixel_pitch_mm;
    lens.sensor_to_lens_range_mm = sensor_range;
    return lens;
}

Homography homography_from_array(const py::array_t<double>& arr) {
    const auto buf = arr.request();
    if (buf.ndim != 2 || buf.shape[0] != 3 || buf.shape[1] != 3) {
        throw ShapeError("expected a (3, 3) float64 array");
    }
    Homography H;
    const auto view = arr.unchecked<2>();
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) H.h[static_cast<std::size_t>(r * 3 + c)] = view(r, c);
    }
    return H;
}

}  // namespace

PYBIND11_MODULE(_fstack, m) {
    m.doc() = "depth-from-focus toolkit core";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);

    // imaging ------------------------------------------------------------
    m.def(
        "depth_to_heatmap",
        [](const py::array_t<float>& depth, float near_m, float far_m) {
            return image_to_array(depth_to_heatmap(depth_from_array(depth),
                                                   near_m, far_m));
        },
        py::arg("depth"), py::arg("near_m"), py::arg("far_m"));

    m.def(
        "save_stack",
        [](const std::filesystem::path& dir,
           const std::vector<py::array_t<std::uint8_t>>& slices,
           const std::vector<float>& focus_settings,
           const py::array_t<float>& label,
           const std::vector<float>& focus_distances_m) {
            StackExample ex;
            for (const auto& s : slices) ex.stack.slices.push_back(image_from_array(s));
            ex.stack.focus_settings = focus_settings;
            ex.stack.depth_label = depth_from_array(label);
            ex.focus_distances_m = focus_distances_m;
            save_stack(ex, dir);
        },
        py::arg("dir"), py::arg("slices"), py::arg("focus_settings"),
        py::arg("label"), py::arg("focus_distances_m") = std::vector<float>{});

    m.def(
        "load_stack",
        [](const std::filesystem::path& dir) {
            const StackExample ex = load_stack(dir);
            std::vector<py::array_t<std::uint8_t>> slices;
            for (const Image& s : ex.stack.slices) slices.push_back(image_to_array(s));
            return py::make_tuple(slices, ex.stack.focus_settings,
                                  depth_to_array(ex.stack.depth_label),
                                  ex.focus_distances_m);
        },
        py::arg("dir"));

    // lens simulation -----------------------------------------------------
    m.def(
        "gen_scene",
        [](std::uint64_t seed, int width, int height,
           std::pair<double, double> depth_range_m, int primitive_count,
           double texture_scale) {
            SceneConfig cfg;
            cfg.seed = seed;
            cfg.width = width;
            cfg.height = height;
            cfg.depth_range_m = depth_range_m;
            cfg.primitive_count = primitive_count;
            cfg.texture_scale = texture_scale;
            const Scene scene = gen_scene(cfg);
            return py::make_tuple(image_to_array(scene.sharp),
                                  depth_to_array(scene.depth));
        },
        py::arg("seed") = 0, py::arg("width") = 64, py::arg("height") = 64,
        py::arg("depth_range_m") = std::pair<double, double>{0.4, 4.0},
        py::arg("primitive_count") = 6, py::arg("texture_scale") = 1.0);

    m.def(
        "coc_radius_px",
        [](double object_depth_m, double focus_m, double focal_length_mm,
           double f_number, double pixel_pitch_mm,
           std::pair<double, double> sensor_range_mm) {
            return coc_radius_px(object_depth_m, focus_m,
                                 lens_from_kwargs(focal_length_mm, f_number,
                                                  pixel_pitch_mm, sensor_range_mm));
        },
        py::arg("object_depth_m"), py::arg("focus_m"),
        py::arg("focal_length_mm") = 50.0, py::arg("f_number") = 1.2,
        py::arg("pixel_pitch_mm") = 0.15,
        py::arg("sensor_range_mm") = std::pair<double, double>{50.5, 57.5});

    m.def(
        "render_stack",
        [](const py::array_t<std::uint8_t>& sharp, const py::array_t<float>& depth,
           int n, std::pair<double, double> focus_range_m, double focal_length_mm,
           double f_number, double pixel_pitch_mm,
           std::pair<double, double> sensor_range_mm) {
            const StackExample ex = render_stack(
                image_from_array(sharp), depth_from_array(depth), n,
                lens_from_kwargs(focal_length_mm, f_number, pixel_pitch_mm,
                                 sensor_range_mm),
                focus_range_m);
            std::vector<py::array_t<std::uint8_t>> slices;
            for (const Image& s : ex.stack.slices) slices.push_back(image_to_array(s));
            return py::make_tuple(slices, ex.stack.focus_settings,
                                  ex.focus_distances_m);
        },
        py::arg("sharp"), py::arg("depth"), py::arg("n") = 8,
        py::arg("focus_range_m") = std::pair<double, double>{0.4, 4.0},
        py::arg("focal_length_mm") = 50.0, py::arg("f_number") = 1.2,
        py::arg("pixel_pitch_mm") = 0.15,
        py::arg("sensor_range_mm") = std::pair<double, double>{50.5, 57.5});

    // preprocessing -------------------------------------------------------
    m.def(
        "erode",
        [](const py::array_t<float>& d, int radius) {
            return depth_to_array(erode(depth_from_array(d), radius));
        },
        py::arg("depth"), py::arg("radius") = 1);
    m.def(
        "dilate",
        [](const py::array_t<float>& d, int radius) {
            return depth_to_array(dilate(depth_from_array(d), radius));
        },
        py::arg("depth"), py::arg("radius") = 1);
    m.def(
        "gaussian_blur",
        [](const py::array_t<float>& d, double sigma) {
            return depth_to_array(gaussian_blur(depth_from_array(d), sigma));
        },
        py::arg("depth"), py::arg("sigma"));
    m.def(
        "gaussian_blur_image",
        [](const py::array_t<std::uint8_t>& img, double sigma) {
            return image_to_array(gaussian_blur(image_from_array(img), sigma));
        },
        py::arg("image"), py::arg("sigma"));
    m.def(
        "apply_homography",
        [](const py::array_t<std::uint8_t>& img, const py::array_t<double>& H,
           int out_width, int out_height) {
            const Image src = image_from_array(img);
            return image_to_array(apply_homography(
                src, homography_from_array(H),
                out_width > 0 ? out_width : src.width,
                out_height > 0 ? out_height : src.height));
        },
        py::arg("image"), py::arg("homography"), py::arg("out_width") = 0,
        py::arg("out_height") = 0);
    m.def(
        "crop_resize",
        [](const py::array_t<std::uint8_t>& img, std::array<int, 4> roi,
           int out_width, int out_height) {
            return image_to_array(crop_resize(image_from_array(img),
                                              Roi{roi[0], roi[1], roi[2], roi[3]},
                                              out_width, out_height));
        },
        py::arg("image"), py::arg("roi"), py::arg("out_width"),
        py::arg("out_height"));
    m.def(
        "crop_resize_depth",
        [](const py::array_t<float>& d, std::array<int, 4> roi, int out_width,
           int out_height) {
            return depth_to_array(crop_resize(depth_from_array(d),
                                              Roi{roi[0], roi[1], roi[2], roi[3]},
                                              out_width, out_height));
        },
        py::arg("depth"), py::arg("roi"), py::arg("out_width"),
        py::arg("out_height"));

    // classical baseline --------------------------------------------------
    m.def(
        "dff_depth",
        [](const std::vector<py::array_t<std::uint8_t>>& slices,
           const std::vector<float>& focus_distances_m, const std::string& measure,
           int window, double contrast_floor_frac) {
            FocalStack stack;
            for (const auto& s : slices) stack.slices.push_back(image_from_array(s));
            for (std::size_t i = 0; i < slices.size(); ++i) {
                stack.focus_settings.push_back(
                    static_cast<float>(i) /
                    static_cast<float>(std::max<std::size_t>(1, slices.size() - 1)));
            }
            if (slices.size() == 1) stack.focus_settings = {0.5f};
            stack.depth_label = DepthMap::create(stack.slices.front().width,
                                                 stack.slices.front().height, 1.0f);
            DffOptions opt;
            opt.window = window;
            opt.contrast_floor_frac = contrast_floor_frac;
            const FocusMeasure fm = measure == "tenengrad"
                                        ? FocusMeasure::Tenengrad
                                        : FocusMeasure::ModifiedLaplacian;
            return depth_to_array(dff_depth(stack, fm, focus_distances_m, opt));
        },
        py::arg("slices"), py::arg("focus_distances_m"),
        py::arg("measure") = "modified_laplacian", py::arg("window") = 5,
        py::arg("contrast_floor_frac") = 1e-3);

    m.def(
        "focus_measure",
        [](const py::array_t<std::uint8_t>& img, const std::string& measure,
           int window) {
            const Image src = image_from_array(img);
            const FocusMap fm = measure == "tenengrad"
                                    ? tenengrad(src, window)
                                    : modified_laplacian(src, window);
            py::array_t<float> arr({fm.height, fm.width});
            auto view = arr.mutable_unchecked<2>();
            for (int y = 0; y < fm.height; ++y) {
                for (int x = 0; x < fm.width; ++x) view(y, x) = fm.at(x, y);
            }
            return arr;
        },
        py::arg("image"), py::arg("measure") = "modified_laplacian",
        py::arg("window") = 5);

    // network -------------------------------------------------------------
    py::class_<nn::Model>(m, "Model")
        .def("predict",
             [](const nn::Model& model, const py::array_t<std::uint8_t>& input) {
                 const auto buf = input.request();
                 nn::Example ex;
                 ex.input.assign(static_cast<const std::uint8_t*>(buf.ptr),
                                 static_cast<const std::uint8_t*>(buf.ptr) + buf.size);
                 const auto out = nn::predict(model, ex);
                 return py::array_t<float>(static_cast<py::ssize_t>(out.size()),
                                           out.data());
             },
             py::arg("input"))
        .def("save", [](const nn::Model& model, const std::filesystem::path& p) {
            nn::save_model(model, p);
        });
    m.def("load_model", [](const std::filesystem::path& p) {
        return nn::load_model(p);
    });

    m.def(
        "train_cnn",
        [](const py::array_t<std::uint8_t>& inputs, const py::array_t<float>& labels,
           double learning_rate, int batch_size, int epochs, double split_fraction,
           std::uint64_t seed, std::array<int, 6> conv_channels, int hidden) {
            const auto ibuf = inputs.request();
            const auto lbuf = labels.request();
            if (ibuf.ndim != 4) throw ShapeError("inputs must be (N, C, H, W) uint8");
            if (lbuf.ndim != 2 || lbuf.shape[0] != ibuf.shape[0]) {
                throw ShapeError("labels must be (N, D) float32");
            }
            const int count = static_cast<int>(ibuf.shape[0]);
            const int channels = static_cast<int>(ibuf.shape[1]);
            const int height = static_cast<int>(ibuf.shape[2]);
            const int width = static_cast<int>(ibuf.shape[3]);
            const std::size_t input_size =
                static_cast<std::size_t>(channels) * height * width;
            const std::size_t label_size = static_cast<std::size_t>(lbuf.shape[1]);

            std::vector<nn::Example> examples(static_cast<std::size_t>(count));
            const auto* iptr = static_cast<const std::uint8_t*>(ibuf.ptr);
            const auto* lptr = static_cast<const float*>(lbuf.ptr);
            for (int i = 0; i < count; ++i) {
                examples[static_cast<std::size_t>(i)].input.assign(
                    iptr + i * input_size, iptr + (i + 1) * input_size);
                examples[static_cast<std::size_t>(i)].label.assign(
                    lptr + i * label_size, lptr + (i + 1) * label_size);
            }
            const nn::ModelSpec spec = nn::ModelSpec::cnn6(
                channels, height, width, static_cast<int>(label_size),
                conv_channels, hidden);
            nn::TrainConfig cfg;
            cfg.learning_rate = learning_rate;
            cfg.batch_size = batch_size;
            cfg.epochs = epochs;
            cfg.split_fraction = split_fraction;
            cfg.seed = seed;
            nn::TrainResult result = nn::train(examples, spec, cfg);
            return py::make_tuple(std::move(result.model), result.loss_history,
                                  result.split.train_indices,
                                  result.split.test_indices);
        },
        py::arg("inputs"), py::arg("labels"), py::arg("learning_rate") = 1e-3,
        py::arg("batch_size") = 32, py::arg("epochs") = 30,
        py::arg("split_fraction") = 0.85, py::arg("seed") = 0,
        py::arg("conv_channels") = std::array<int, 6>{16, 16, 32, 32, 64, 64},
        py::arg("hidden") = 256);

    // bench ---------------------------------------------------------------
    m.def(
        "generate_dataset",
        [](const std::filesystem::path& out_dir, std::uint64_t seed, int count,
           int augment_factor, int n_slices, int slice_size, int label_size) {
            bench::DatasetGenConfig cfg;
            cfg.seed = seed;
            cfg.count = count;
            cfg.augment_factor = augment_factor;
            cfg.n_slices = n_slices;
            cfg.slice_size = slice_size;
            cfg.label_size = label_size;
            const auto manifest = bench::generate_dataset(cfg, out_dir);
            return manifest.examples.size();
        },
        py::arg("out_dir"), py::arg("seed") = 0, py::arg("count") = 8,
        py::arg("augment_factor") = 0, py::arg("n_slices") = 8,
        py::arg("slice_size") = 64, py::arg("label_size") = 16);

    m.def(
        "run_experiment",
        [](const std::filesystem::path& dataset_dir, const std::string& mode,
           std::uint64_t seed, int epochs, int batch_size, double learning_rate,
           double split_fraction, const std::filesystem::path& out_dir) {
            bench::ExperimentConfig cfg;
            cfg.mode = bench::mode_from_string(mode);
            cfg.dataset_dir = dataset_dir;
            cfg.train.seed = seed;
            cfg.train.epochs = epochs;
            cfg.train.batch_size = batch_size;
            cfg.train.learning_rate = learning_rate;
            cfg.train.split_fraction = split_fraction;
            cfg.out_dir = out_dir;
            const auto report = bench::run_experiment(cfg);
            return py::dict(
                py::arg("mode") = report.mode,
                py::arg("train_mse") = report.train.mse,
                py::arg("train_mae") = report.train.mae,
                py::arg("test_mse") = report.test.mse,
                py::arg("test_mae") = report.test.mae,
                py::arg("loss_history") = report.loss_history);
        },
        py::arg("dataset_dir"), py::arg("mode") = "stack", py::arg("seed") = 0,
        py::arg("epochs") = 5, py::arg("batch_size") = 32,
        py::arg("learning_rate") = 1e-3, py::arg("split_fraction") = 0.85,
        py::arg("out_dir") = std::filesystem::path{});
}
