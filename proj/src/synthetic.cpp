#include "slimq/synthetic.hpp"

#include "slimq/error.hpp"

#include <algorithm>
#include <cmath>

namespace slimq::synthetic {

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = static_cast<float>(dist(rng));
  return out;
}

Layer clustered_layer(const LayerSpec& spec, std::uint64_t seed) {
  if (spec.cols < spec.clusters * spec.cluster_max_width)
    throw Error(ErrorCode::InvalidArgument, "too many clusters for the channel count");
  std::mt19937_64 rng(seed);
  Layer layer;
  layer.weights = gaussian(spec.rows, spec.cols, spec.weight_std, rng);

  std::uniform_int_distribution<int> width_dist(spec.cluster_min_width, spec.cluster_max_width);
  std::uniform_int_distribution<Eigen::Index> start_dist(0, spec.cols - spec.cluster_max_width);
  std::vector<bool> taken(static_cast<std::size_t>(spec.cols), false);
  for (int c = 0; c < spec.clusters; ++c) {
    const int width = width_dist(rng);
    Eigen::Index start = start_dist(rng);
    // Re-draw until the run does not touch an earlier cluster.
    auto overlaps = [&](Eigen::Index s) {
      for (Eigen::Index j = std::max<Eigen::Index>(0, s - 1); j < std::min(spec.cols, s + width + 1); ++j)
        if (taken[j]) return true;
      return false;
    };
    while (overlaps(start)) start = start_dist(rng);
    for (Eigen::Index j = start; j < start + width; ++j) {
      taken[j] = true;
      layer.salient_channels.push_back(j);
    }
  }
  std::sort(layer.salient_channels.begin(), layer.salient_channels.end());

  // Unit-variance loadings, drawn once so every sample shares the same correlation structure.
  const Matrix loadings = spec.factor_rank > 0 ? gaussian(spec.factor_rank, spec.cols, 1.0, rng) : Matrix();
  for (std::size_t s = 0; s < spec.samples; ++s) {
    Matrix x = std::sqrt(1.0 - spec.factor_share) * gaussian(spec.tokens, spec.cols, 1.0, rng);
    if (spec.factor_rank > 0 && spec.factor_share > 0.0)
      x += std::sqrt(spec.factor_share / spec.factor_rank) * gaussian(spec.tokens, spec.factor_rank, 1.0, rng) * loadings;
    for (auto j : layer.salient_channels) x.col(j) *= spec.cluster_scale;
    // Round-trip through float so in-memory data matches what an SLMT file holds.
    layer.calib.samples.push_back(x.cast<float>().cast<double>());
  }
  layer.weights = layer.weights.cast<float>().cast<double>();
  return layer;
}

Matrix outlier_activations(Eigen::Index tokens, Eigen::Index channels, Eigen::Index outlier_channel,
                           double magnitude, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Matrix x = gaussian(tokens, channels, 1.0, rng);
  std::uniform_int_distribution<Eigen::Index> token_dist(0, tokens - 1);
  x(token_dist(rng), outlier_channel) = magnitude;
  return x;
}

}  // namespace slimq::synthetic
