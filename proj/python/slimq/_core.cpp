#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "slimq/error.hpp"
#include "slimq/kernel.hpp"
#include "slimq/packfmt.hpp"
#include "slimq/pipeline.hpp"
#include "slimq/tensor_store.hpp"

namespace py = pybind11;
using namespace slimq;

namespace {

CalibrationSet calibration(const std::vector<Matrix>& samples) {
  CalibrationSet c;
  c.samples = samples;
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Salience-driven mixed-precision weight quantization";

  static py::exception<Error> error(m, "SlimqError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error.ptr(), e.what());
    }
  });

  py::class_<QuantizedBlock>(m, "QuantizedBlock")
      .def_property_readonly("bits", [](const QuantizedBlock& b) { return b.params.bit_width; })
      .def_property_readonly("scale", [](const QuantizedBlock& b) { return b.params.scale; })
      .def_property_readonly("zero", [](const QuantizedBlock& b) { return b.params.zero; })
      .def_property_readonly("binary", [](const QuantizedBlock& b) { return b.params.binary; })
      .def_property_readonly("codes", [](const QuantizedBlock& b) {
        Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> c(b.rows, b.cols);
        for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = b.codes[static_cast<std::size_t>(i)];
        return c;
      })
      .def("dequantize", [](const QuantizedBlock& b) { return dequantize(b); });

  m.def("quantize_uniform", [](const Matrix& block, int bits) { return quantize_uniform(block, bits); },
        py::arg("block"), py::arg("bits"));
  m.def("fake_quantize", &fake_quantize, py::arg("block"), py::arg("bits"), py::arg("binary") = false);

  m.def("hessian", [](const Matrix& tokens) { return accumulate_hessian(tokens); }, py::arg("tokens"));
  m.def(
      "salience",
      [](const Matrix& w, const Matrix& tokens, Eigen::Index group_size, double percdamp) {
        const HessianState hs = damp_and_invert(accumulate_hessian(tokens), percdamp);
        const SalienceMap s = salience_map(w, hs, group_size);
        return py::make_tuple(s.delta, s.channel_mean, s.group_mean);
      },
      py::arg("weights"), py::arg("tokens"), py::arg("group_size") = 128, py::arg("percdamp") = 0.01,
      "Returns (delta, channel_mean, group_mean).");
  m.def(
      "output_kl",
      [](const Matrix& x, const Matrix& w, const Matrix& w_hat, double temperature, double epsilon) {
        return output_kl(x, w, w_hat, KlConfig{temperature, epsilon});
      },
      py::arg("x"), py::arg("weights"), py::arg("w_hat"), py::arg("temperature") = 1.0, py::arg("epsilon") = 1e-8);

  py::class_<BitPlan>(m, "BitPlan")
      .def_readonly("bits", &BitPlan::bits)
      .def_readonly("p_star", &BitPlan::p_star)
      .def_readonly("kl_curve", &BitPlan::kl_curve)
      .def_readonly("evaluations", &BitPlan::evaluations);

  py::class_<QuantizationResult>(m, "QuantizationResult")
      .def_readonly("plan", &QuantizationResult::plan)
      .def_readonly("blocks", &QuantizationResult::blocks)
      .def_readonly("gammas", &QuantizationResult::gammas)
      .def_readonly("proxy_loss", &QuantizationResult::proxy_loss)
      .def_readonly("recon_mse", &QuantizationResult::recon_mse)
      .def_readonly("recon_kl", &QuantizationResult::recon_kl)
      .def("dequantized", &QuantizationResult::dequantized);

  m.def(
      "quantize_layer",
      [](const Matrix& w, const std::vector<Matrix>& calib, int bits, Eigen::Index group_size, double percdamp,
         bool sba, bool sqc, bool compensation, bool binarize_1bit) {
        PipelineConfig cfg;
        cfg.bits = bits;
        cfg.group_size = group_size;
        cfg.percdamp = percdamp;
        cfg.sba_enabled = sba;
        cfg.sqc_enabled = sqc;
        cfg.compensation_enabled = compensation;
        cfg.binarize_1bit = binarize_1bit;
        py::gil_scoped_release release;
        return quantize_layer(w, calibration(calib), cfg);
      },
      py::arg("weights"), py::arg("calib"), py::arg("bits") = 2, py::arg("group_size") = 128,
      py::arg("percdamp") = 0.01, py::arg("sba") = true, py::arg("sqc") = true, py::arg("compensation") = true,
      py::arg("binarize_1bit") = false, "calib is a list of t x m activation arrays.");

  py::class_<PackedModel>(m, "PackedModel")
      .def_readonly("rows", &PackedModel::rows)
      .def_readonly("cols", &PackedModel::cols)
      .def_readonly("group_size", &PackedModel::group_size)
      .def_readonly("offsets", &PackedModel::offsets)
      .def("to_bytes", [](const PackedModel& pm) {
        const auto b = encode_packed(pm);
        return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
      })
      .def_static("from_bytes", [](const py::bytes& data) {
        const std::string s = data;
        return decode_packed(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
      })
      .def("bits_per_weight", [](const PackedModel& pm) { return packed_size_report(pm).bits_per_weight; });

  m.def("pack", &pack, py::arg("result"));
  m.def("unpack", &unpack, py::arg("packed"));
  m.def("save_packed", &save_packed, py::arg("packed"), py::arg("path"));
  m.def("load_packed", &load_packed, py::arg("path"));
  m.def(
      "packed_matmul", [](const PackedModel& pm, const MatrixF& x) { return packed_matmul(pm, x); },
      py::arg("packed"), py::arg("x"));
  m.def("dense_reference", &dense_reference, py::arg("packed"), py::arg("x"));

  m.def(
      "read_tensor",
      [](const std::filesystem::path& p) {
        const DenseTensor t = read_tensor(p);
        return py::make_tuple(t.dims, t.data);
      },
      py::arg("path"), "Returns (dims, flat data).");
  m.def(
      "write_matrix", [](const Matrix& a, const std::filesystem::path& p) { write_tensor(tensor_from_matrix(a), p); },
      py::arg("array"), py::arg("path"));
  m.def(
      "read_matrix", [](const std::filesystem::path& p) { return matrix_from_tensor(read_tensor(p)); },
      py::arg("path"));
}
