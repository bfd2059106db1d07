#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pmri/clear.hpp"
#include "pmri/config.hpp"
#include "pmri/fourier.hpp"
#include "pmri/io.hpp"
#include "pmri/metrics.hpp"
#include "pmri/phantom.hpp"
#include "pmri/unrolled.hpp"

namespace py = pybind11;
using namespace pmri;

namespace {

using CArr = py::array_t<std::complex<double>, py::array::c_style |
                                                   py::array::forcecast>;
using U8Arr = py::array_t<uint8_t, py::array::c_style | py::array::forcecast>;

ComplexImage to_image(const CArr& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d array");
  ComplexImage img(int(a.shape(0)), int(a.shape(1)));
  std::copy(a.data(), a.data() + img.size(), img.data.begin());
  return img;
}

MultiCoilImage to_multicoil(const CArr& a) {
  if (a.ndim() != 3) throw std::invalid_argument("expected a 3-d array");
  MultiCoilImage img(int(a.shape(0)), int(a.shape(1)), int(a.shape(2)));
  std::copy(a.data(), a.data() + img.size(), img.data.begin());
  return img;
}

KSpaceData to_kspace(const CArr& a) {
  if (a.ndim() != 3) throw std::invalid_argument("expected a 3-d array");
  KSpaceData k(int(a.shape(0)), int(a.shape(1)), int(a.shape(2)));
  std::copy(a.data(), a.data() + k.size(), k.data.begin());
  return k;
}

SamplingMask to_mask(const U8Arr& a, double accel) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d array");
  SamplingMask m(int(a.shape(0)), int(a.shape(1)), accel);
  std::copy(a.data(), a.data() + m.keep.size(), m.keep.begin());
  return m;
}

LabelMap to_labels(const U8Arr& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d array");
  LabelMap l(int(a.shape(0)), int(a.shape(1)));
  std::copy(a.data(), a.data() + l.labels.size(), l.labels.begin());
  return l;
}

py::array from_image(const ComplexImage& img) {
  py::array_t<std::complex<double>> a({img.height, img.width});
  std::copy(img.data.begin(), img.data.end(), a.mutable_data());
  return a;
}

py::array from_multicoil(const MultiCoilImage& img) {
  py::array_t<std::complex<double>> a({img.coils, img.height, img.width});
  std::copy(img.data.begin(), img.data.end(), a.mutable_data());
  return a;
}

py::array from_kspace(const KSpaceData& k) {
  py::array_t<std::complex<double>> a({k.coils, k.height, k.width});
  std::copy(k.data.begin(), k.data.end(), a.mutable_data());
  return a;
}

py::array from_mask(const SamplingMask& m) {
  py::array_t<uint8_t> a({m.height, m.width});
  std::copy(m.keep.begin(), m.keep.end(), a.mutable_data());
  return a;
}

py::array from_labels(const LabelMap& l) {
  py::array_t<uint8_t> a({l.height, l.width});
  std::copy(l.labels.begin(), l.labels.end(), a.mutable_data());
  return a;
}

}  // namespace

PYBIND11_MODULE(pmrilab, m) {
  m.doc() = "Calibrationless parallel MRI reconstruction lab";

  py::register_exception<io_error>(m, "IoError");
  py::register_exception<config_error>(m, "ConfigError");
  py::register_exception<numeric_error>(m, "NumericError");

  m.def("fft2c", [](const CArr& x) { return from_image(fft2c(to_image(x))); },
        "Centered unitary 2-d FFT");
  m.def("ifft2c",
        [](const CArr& x) { return from_image(ifft2c(to_image(x))); },
        "Inverse of fft2c");

  m.def(
      "apply_forward",
      [](const CArr& img, const U8Arr& mask) {
        return from_kspace(apply_forward(to_multicoil(img), to_mask(mask, 1)));
      },
      py::arg("image"), py::arg("mask"));
  m.def(
      "apply_adjoint",
      [](const CArr& k, const U8Arr& mask) {
        return from_multicoil(apply_adjoint(to_kspace(k), to_mask(mask, 1)));
      },
      py::arg("kspace"), py::arg("mask"));
  m.def(
      "dc_solve",
      [](const CArr& z, const CArr& b, const U8Arr& mask, double lam) {
        return from_multicoil(
            dc_solve(to_multicoil(z), to_kspace(b), to_mask(mask, 1), lam));
      },
      py::arg("z"), py::arg("b"), py::arg("mask"), py::arg("lambda"));

  m.def(
      "make_phantom",
      [](int height, int width, uint64_t seed) {
        PhantomSpec spec;
        spec.height = height;
        spec.width = width;
        auto [img, lab] = make_phantom(spec, seed);
        return py::make_tuple(from_image(img), from_labels(lab));
      },
      py::arg("height") = 64, py::arg("width") = 64, py::arg("seed") = 0);
  m.def(
      "make_coil_sensitivities",
      [](int height, int width, int coils, uint64_t seed) {
        return from_multicoil(
            make_coil_sensitivities(height, width, coils, seed));
      },
      py::arg("height") = 64, py::arg("width") = 64, py::arg("coils") = 4,
      py::arg("seed") = 0);
  m.def(
      "make_vd_mask",
      [](int height, int width, double accel, double center_fraction,
         double density, uint64_t seed) {
        return from_mask(make_vd_mask(height, width, accel, center_fraction,
                                      density, seed));
      },
      py::arg("height") = 64, py::arg("width") = 64, py::arg("accel") = 6.0,
      py::arg("center_fraction") = 0.04, py::arg("density") = 3.0,
      py::arg("seed") = 0);
  m.def(
      "simulate_acquisition",
      [](const CArr& image, const CArr& sens, const U8Arr& mask, double accel,
         double sigma, uint64_t seed) {
        Dataset ds = simulate_acquisition(to_image(image), to_multicoil(sens),
                                          to_mask(mask, accel), sigma, seed);
        py::dict out;
        out["kspace"] = from_kspace(ds.kspace);
        out["mask"] = from_mask(ds.mask);
        out["sens"] = from_multicoil(ds.sens);
        out["reference"] = from_image(ds.reference);
        return out;
      },
      py::arg("image"), py::arg("sens"), py::arg("mask"), py::arg("accel"),
      py::arg("sigma"), py::arg("seed") = 0);

  m.def(
      "sos",
      [](const CArr& img) { return from_image(sos(to_multicoil(img))); },
      "Root sum of squared coil magnitudes");

  m.def(
      "nuclear_norm",
      [](const CArr& a) {
        if (a.ndim() != 2) throw std::invalid_argument("expected a matrix");
        CMat mat(int(a.shape(0)), int(a.shape(1)));
        for (int i = 0; i < mat.rows; ++i)
          for (int j = 0; j < mat.cols; ++j)
            mat.at(i, j) = a.data()[size_t(i) * mat.cols + j];
        return nuclear_norm(mat);
      },
      "Sum of singular values");

  m.def(
      "clear_reconstruct",
      [](const CArr& b, const U8Arr& mask, double lam, int patch_size,
         int stride, int iters) {
        PatchConfig pc{patch_size, stride};
        auto [img, state] = clear_reconstruct(to_kspace(b), to_mask(mask, 1),
                                              lam, pc, iters);
        py::dict info;
        info["objective_before"] = state.objective_before;
        info["objective_after"] = state.objective_after;
        info["cg_all_converged"] = state.cg_all_converged;
        return py::make_tuple(from_multicoil(img), info);
      },
      py::arg("kspace"), py::arg("mask"), py::arg("lambda") = 100.0,
      py::arg("patch_size") = 8, py::arg("stride") = 4, py::arg("iters") = 15);

  m.def(
      "idslr_reconstruct",
      [](const CArr& kspace, const U8Arr& mask, double accel,
         const std::string& checkpoint) {
        Dataset ds;
        ds.kspace = to_kspace(kspace);
        ds.mask = to_mask(mask, accel);
        py::dict out;
        auto finish = [&](auto&& result) {
          out["sos"] = from_image(result.sos_img);
          if (result.seg) out["seg"] = from_labels(*result.seg);
        };
        if (checkpoint_scalar(checkpoint) == "f64") {
          auto model = load_checkpoint_f64(checkpoint);
          ds.sens = MultiCoilImage(ds.kspace.coils, ds.kspace.height,
                                   ds.kspace.width);
          ds.reference = ComplexImage(ds.kspace.height, ds.kspace.width);
          finish(model_infer(model, ds));
        } else {
          auto model = load_checkpoint_f32(checkpoint);
          ds.sens = MultiCoilImage(ds.kspace.coils, ds.kspace.height,
                                   ds.kspace.width);
          ds.reference = ComplexImage(ds.kspace.height, ds.kspace.width);
          finish(model_infer(model, ds));
        }
        return out;
      },
      py::arg("kspace"), py::arg("mask"), py::arg("accel"),
      py::arg("checkpoint"));

  m.def(
      "snr_db",
      [](const CArr& rec, const CArr& org) {
        return snr_db(to_image(rec), to_image(org));
      },
      py::arg("rec"), py::arg("org"));
  m.def(
      "ssim",
      [](const CArr& rec, const CArr& org) {
        return ssim(to_image(rec), to_image(org));
      },
      py::arg("rec"), py::arg("org"));
  m.def(
      "dice",
      [](const U8Arr& pred, const U8Arr& ref, int cls) {
        return dice(to_labels(pred), to_labels(ref), cls);
      },
      py::arg("pred"), py::arg("ref"), py::arg("cls"));

  m.def(
      "write_tensor",
      [](const std::string& path, const CArr& a) {
        if (a.ndim() == 2)
          write_tensor(path, to_image(a));
        else if (a.ndim() == 3)
          write_tensor(path, to_multicoil(a));
        else
          throw std::invalid_argument("expected a 2-d or 3-d array");
      },
      py::arg("path"), py::arg("array"));
  m.def(
      "read_tensor",
      [](const std::string& path) -> py::object {
        TensorBlob b = read_blob(path);
        if (b.dtype == Dtype::c64 && b.shape.size() == 2)
          return from_image(blob_to_image(b));
        if (b.dtype == Dtype::c64 && b.shape.size() == 3)
          return from_multicoil(blob_to_multicoil(b));
        if (b.dtype == Dtype::u8 && b.shape.size() == 2)
          return from_labels(blob_to_labels(b));
        throw io_error("unsupported tensor layout in " + path);
      },
      py::arg("path"));

  m.attr("__version__") = "0.1.0";
}
