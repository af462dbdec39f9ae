#include "cli.hpp"

#include "report.hpp"
#include "slimq/error.hpp"
#include "slimq/kernel.hpp"
#include "slimq/packfmt.hpp"
#include "slimq/pipeline.hpp"
#include "slimq/synthetic.hpp"
#include "slimq/tensor_store.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>

namespace slimq::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// Outputs are written beside their destination and renamed into place only
// once every output of the command succeeded; otherwise all are removed.
class StagedOutputs {
 public:
  fs::path stage(const fs::path& final_path) {
    fs::path tmp = final_path;
    tmp += ".partial";
    staged_.emplace_back(tmp, final_path);
    return tmp;
  }
  void commit() {
    for (const auto& [tmp, dst] : staged_) {
      std::error_code ec;
      fs::rename(tmp, dst, ec);
      if (ec) throw Error(ErrorCode::IoFailure, "cannot move output into " + dst.string());
    }
    staged_.clear();
  }
  ~StagedOutputs() {
    for (const auto& [tmp, dst] : staged_) {
      std::error_code ec;
      fs::remove(tmp, ec);
    }
  }

 private:
  std::vector<std::pair<fs::path, fs::path>> staged_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  f << text;
  if (!f) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

struct QuantizeArgs {
  std::string weights, calib, out, report, curve;
  std::uint64_t seed = 0;
  bool no_sba = false, no_sqc = false, no_comp = false, cholesky_salience = false;
  PipelineConfig cfg;
};

struct EvalArgs {
  std::string packed, weights, calib, report, out;
  double percdamp = 0.01;
  KlConfig kl;
  std::size_t max_tokens = 4096;
};

struct InspectArgs {
  std::string weights, calib, prefix = "inspect";
  Eigen::Index group_size = 128;
  double percdamp = 0.01;
  bool cholesky_salience = false;
};

struct MatmulArgs {
  std::string packed, input, output;
  std::size_t repeats = 5;
};

struct GenArgs {
  synthetic::LayerSpec spec;
  std::uint64_t seed = 0;
  std::string weights_out, calib_out;
  long outlier_channel = -1;
  double outlier_magnitude = 100.0;
};

int cmd_quantize(QuantizeArgs& a, unsigned threads, std::ostream& out) {
  a.cfg.sba_enabled = !a.no_sba;
  a.cfg.sqc_enabled = !a.no_sqc;
  a.cfg.compensation_enabled = !a.no_comp;
  a.cfg.threads = threads;
  if (a.cholesky_salience) a.cfg.denominator = SalienceDenominator::CholeskyDiagonal;

  const Matrix w = matrix_from_tensor(read_tensor(a.weights));
  const CalibrationSet calib = calibration_from_tensor(read_tensor(a.calib));
  const QuantizationResult result = quantize_layer(w, calib, a.cfg);
  const PackedModel pm = pack(result);
  const SizeReport size = packed_size_report(pm);
  ordered_json rep = quantize_report(a.cfg, result, size);
  rep["config"]["seed"] = a.seed;

  StagedOutputs staged;
  save_packed(pm, staged.stage(a.out));
  write_text(staged.stage(a.report.empty() ? a.out + ".json" : a.report), rep.dump(2) + "\n");
  if (!a.curve.empty()) {
    std::string csv = "p,kl\n";
    for (std::size_t p = 0; p < result.plan.kl_curve.size(); ++p) {
      char line[64];
      std::snprintf(line, sizeof line, "%zu,%.17g\n", p, result.plan.kl_curve[p]);
      csv += line;
    }
    write_text(staged.stage(a.curve), csv);
  }
  staged.commit();
  out << rep["metrics"].dump() << "\n";
  return 0;
}

int cmd_eval(const EvalArgs& a, unsigned threads, std::ostream& out) {
  const PackedModel pm = load_packed(a.packed);
  const QuantizationResult q = unpack(pm);
  const Matrix w = matrix_from_tensor(read_tensor(a.weights));
  const CalibrationSet calib = calibration_from_tensor(read_tensor(a.calib));
  if (w.rows() != q.rows || w.cols() != q.cols)
    throw Error(ErrorCode::ShapeMismatch, "weights do not match the packed model");
  if (calib.channels() != static_cast<std::size_t>(w.cols()))
    throw Error(ErrorCode::ShapeMismatch, "calibration channels != weight columns");

  const Matrix tokens = calib.stacked();
  const HessianState hs = damp_and_invert(accumulate_hessian(tokens), a.percdamp);
  const Matrix w_hat = q.dequantized();
  const SizeReport size = packed_size_report(pm);

  ordered_json rep;
  rep["recon_mse"] = reconstruction_mse(w, w_hat);
  rep["proxy_loss"] = proxy_loss(w, w_hat, hs);
  rep["output_kl"] = output_kl(subsample_tokens(tokens, a.max_tokens), w, w_hat, a.kl, threads);
  rep["bits_per_weight"] = size.bits_per_weight;
  rep["padded_bits_per_weight"] = size.padded_bits_per_weight;
  rep["bit_histogram"] = bit_histogram(q.plan.bits);
  if (!a.report.empty()) {
    // Gammas are not stored in SLMQ; they come from the quantize report.
    std::ifstream f(a.report);
    if (!f) throw Error(ErrorCode::IoFailure, "cannot open " + a.report);
    const auto qrep = ordered_json::parse(f);
    rep["gamma_histogram"] = qrep.at("gamma").at("histogram");
  }
  const std::string text = rep.dump(2) + "\n";
  if (a.out.empty()) {
    out << text;
  } else {
    StagedOutputs staged;
    write_text(staged.stage(a.out), text);
    staged.commit();
  }
  return 0;
}

int cmd_inspect(const InspectArgs& a, std::ostream& out) {
  const Matrix w = matrix_from_tensor(read_tensor(a.weights));
  const CalibrationSet calib = calibration_from_tensor(read_tensor(a.calib));
  if (calib.channels() != static_cast<std::size_t>(w.cols()))
    throw Error(ErrorCode::ShapeMismatch, "calibration channels != weight columns");
  const HessianState hs = damp_and_invert(accumulate_hessian(calib), a.percdamp);
  const SalienceMap sal = salience_map(w, hs, a.group_size,
                                       a.cholesky_salience ? SalienceDenominator::CholeskyDiagonal
                                                           : SalienceDenominator::InverseDiagonal);
  std::string channels = "channel,mean_salience\n";
  char line[96];
  for (std::size_t j = 0; j < sal.channel_mean.size(); ++j) {
    std::snprintf(line, sizeof line, "%zu,%.17g\n", j, sal.channel_mean[j]);
    channels += line;
  }
  std::string groups = "group,mean_salience,mask_density\n";
  for (std::size_t g = 0; g < sal.group_mean.size(); ++g) {
    const Mask mask = salient_mask_3sigma(sal.delta.middleCols(static_cast<Eigen::Index>(g) * a.group_size, a.group_size));
    const double density = mask.size() ? static_cast<double>(mask.count()) / mask.size() : 0.0;
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g\n", g, sal.group_mean[g], density);
    groups += line;
  }
  StagedOutputs staged;
  write_text(staged.stage(a.prefix + "_channels.csv"), channels);
  write_text(staged.stage(a.prefix + "_groups.csv"), groups);
  staged.commit();

  const auto top = std::max_element(sal.channel_mean.begin(), sal.channel_mean.end());
  ordered_json summary = {
      {"channels_csv", a.prefix + "_channels.csv"},
      {"groups_csv", a.prefix + "_groups.csv"},
      {"top_channel", top == sal.channel_mean.end() ? -1 : top - sal.channel_mean.begin()},
  };
  out << summary.dump() << "\n";
  return 0;
}

MatrixF input_matrix(const std::string& path) {
  const DenseTensor t = read_tensor(path);
  if (t.dims.size() != 2) throw Error(ErrorCode::ShapeMismatch, "input must be a 2-D t x m tensor");
  return matrix_from_tensor(t).cast<float>();
}

int cmd_matmul(const MatmulArgs& a, unsigned threads, std::ostream& out) {
  const PackedModel pm = load_packed(a.packed);
  const MatrixF y = packed_matmul(pm, input_matrix(a.input), threads);
  StagedOutputs staged;
  write_tensor(tensor_from_matrix(y.cast<double>()), staged.stage(a.output));
  staged.commit();
  out << ordered_json{{"rows", y.rows()}, {"cols", y.cols()}}.dump() << "\n";
  return 0;
}

int cmd_bench(const MatmulArgs& a, unsigned threads, std::ostream& out) {
  const PackedModel pm = load_packed(a.packed);
  out << bench_report(bench(pm, input_matrix(a.input), a.repeats, threads)).dump(2) << "\n";
  return 0;
}

int cmd_gen(const GenArgs& a, std::ostream& out) {
  synthetic::Layer layer = synthetic::clustered_layer(a.spec, a.seed);
  if (a.outlier_channel >= 0) {
    if (a.outlier_channel >= a.spec.cols) throw Error(ErrorCode::InvalidArgument, "outlier channel out of range");
    layer.calib.samples = {synthetic::outlier_activations(a.spec.tokens, a.spec.cols, a.outlier_channel,
                                                          a.outlier_magnitude, a.seed)};
    layer.salient_channels = {a.outlier_channel};
  }
  DenseTensor calib;
  calib.dims = {layer.calib.samples.size(), static_cast<std::uint64_t>(a.spec.tokens),
                static_cast<std::uint64_t>(a.spec.cols)};
  for (const auto& s : layer.calib.samples)
    for (Eigen::Index i = 0; i < s.size(); ++i) calib.data.push_back(static_cast<float>(s.data()[i]));
  StagedOutputs staged;
  write_tensor(tensor_from_matrix(layer.weights), staged.stage(a.weights_out));
  write_tensor(calib, staged.stage(a.calib_out));
  staged.commit();
  out << ordered_json{{"salient_channels", layer.salient_channels}}.dump() << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"slimq: salience-driven mixed-precision weight quantization", "slimq"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: SLIMQ_THREADS or 1)");

  QuantizeArgs qa;
  auto* quantize = app.add_subcommand("quantize", "Quantize a weight matrix into an SLMQ file");
  quantize->add_option("--weights", qa.weights, "n x m SLMT weights")->required();
  quantize->add_option("--calib", qa.calib, "t x m or s x t x m SLMT activations")->required();
  quantize->add_option("--out", qa.out, "SLMQ output path")->required();
  quantize->add_option("--report", qa.report, "JSON report path (default <out>.json)");
  quantize->add_option("--bits", qa.cfg.bits, "Average bit width")->check(CLI::IsMember({2, 3}));
  quantize->add_option("--group-size", qa.cfg.group_size, "Columns per group")->check(CLI::PositiveNumber);
  quantize->add_option("--percdamp", qa.cfg.percdamp, "Hessian damping as a fraction of mean diag")
      ->check(CLI::NonNegativeNumber);
  quantize->add_flag("--no-sba", qa.no_sba, "Uniform bit widths");
  quantize->add_flag("--no-sqc", qa.no_sqc, "Plain min-max quantizer (gamma = 1)");
  quantize->add_flag("--no-compensation", qa.no_comp, "Skip error compensation");
  quantize->add_flag("--binarize-1bit", qa.cfg.binarize_1bit, "Sign binarizer for 1-bit groups");
  quantize->add_flag("--inner-columnwise", qa.cfg.inner_columnwise, "Column-by-column compensation inside groups");
  quantize->add_flag("--cholesky-salience", qa.cholesky_salience, "Salience denominator from the Cholesky factor");
  quantize->add_option("--gamma-lambda", qa.cfg.sqc.lambda, "Half width of the gamma interval");
  quantize->add_option("--gamma-steps", qa.cfg.sqc.steps, "Gamma grid has 2 * steps points");
  quantize->add_flag("--per-row-gamma", qa.cfg.sqc.per_row_gamma, "Search gamma per row");
  quantize->add_option("--kl-temperature", qa.cfg.kl.temperature, "Softmax temperature for the KL objective");
  quantize->add_option("--kl-epsilon", qa.cfg.kl.epsilon, "Probability floor for the KL objective");
  quantize->add_option("--kl-max-tokens", qa.cfg.max_kl_tokens, "Token rows used by the KL search");
  quantize->add_option("--emit-curve", qa.curve, "CSV of (p, KL) from the allocation search");
  quantize->add_option("--seed", qa.seed, "Recorded in the report; quantization itself is seed-free");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Score an SLMQ file against the original weights");
  eval->add_option("--packed", ea.packed)->required();
  eval->add_option("--weights", ea.weights)->required();
  eval->add_option("--calib", ea.calib)->required();
  eval->add_option("--report", ea.report, "Quantize report, for the gamma histogram");
  eval->add_option("--out", ea.out, "Write JSON here instead of stdout");
  eval->add_option("--percdamp", ea.percdamp)->check(CLI::NonNegativeNumber);
  eval->add_option("--kl-temperature", ea.kl.temperature);
  eval->add_option("--kl-epsilon", ea.kl.epsilon);
  eval->add_option("--kl-max-tokens", ea.max_tokens);

  InspectArgs ia;
  auto* inspect = app.add_subcommand("inspect", "Salience per channel and per group as CSV");
  inspect->add_option("--weights", ia.weights)->required();
  inspect->add_option("--calib", ia.calib)->required();
  inspect->add_option("--group-size", ia.group_size)->check(CLI::PositiveNumber);
  inspect->add_option("--percdamp", ia.percdamp)->check(CLI::NonNegativeNumber);
  inspect->add_option("--prefix", ia.prefix, "Writes <prefix>_channels.csv and <prefix>_groups.csv");
  inspect->add_flag("--cholesky-salience", ia.cholesky_salience);

  MatmulArgs ma;
  auto* matmul = app.add_subcommand("matmul", "y = x * w_hat^T from an SLMQ file");
  matmul->add_option("--packed", ma.packed)->required();
  matmul->add_option("--input", ma.input, "t x m SLMT")->required();
  matmul->add_option("--out", ma.output, "t x n SLMT")->required();

  MatmulArgs ba;
  auto* benchcmd = app.add_subcommand("bench", "Time packed vs dense matmul");
  benchcmd->add_option("--packed", ba.packed)->required();
  benchcmd->add_option("--input", ba.input)->required();
  benchcmd->add_option("--repeats", ba.repeats)->check(CLI::PositiveNumber);

  GenArgs ga;
  auto* gen = app.add_subcommand("gen", "Write a seeded synthetic layer and calibration batch");
  gen->add_option("--rows", ga.spec.rows);
  gen->add_option("--cols", ga.spec.cols);
  gen->add_option("--tokens", ga.spec.tokens);
  gen->add_option("--samples", ga.spec.samples);
  gen->add_option("--clusters", ga.spec.clusters);
  gen->add_option("--cluster-scale", ga.spec.cluster_scale);
  gen->add_option("--outlier-channel", ga.outlier_channel, "Single-token outlier instead of clusters");
  gen->add_option("--outlier-magnitude", ga.outlier_magnitude);
  gen->add_option("--seed", ga.seed);
  gen->add_option("--weights-out", ga.weights_out)->required();
  gen->add_option("--calib-out", ga.calib_out)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*quantize) return cmd_quantize(qa, threads, out);
    if (*eval) return cmd_eval(ea, threads, out);
    if (*inspect) return cmd_inspect(ia, out);
    if (*matmul) return cmd_matmul(ma, threads, out);
    if (*benchcmd) return cmd_bench(ba, threads, out);
    if (*gen) return cmd_gen(ga, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace slimq::cli
