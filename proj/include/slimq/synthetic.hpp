#pragma once

// Seeded synthetic layers and calibration batches for tests and demos.

#include "slimq/matrix.hpp"
#include "slimq/tensor_store.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace slimq::synthetic {

struct LayerSpec {
  Eigen::Index rows = 64;
  Eigen::Index cols = 512;
  Eigen::Index tokens = 2048;  // well above cols so the Hessian proxy is full rank
  std::size_t samples = 1;
  int clusters = 3;             // runs of adjacent high-variance activation channels
  int cluster_min_width = 2;
  int cluster_max_width = 5;
  double cluster_scale = 20.0;  // activation std inside a cluster (background std is 1)
  double weight_std = 0.02;
  int factor_rank = 16;         // shared latent factors behind the background channels
  double factor_share = 0.5;    // fraction of background variance explained by the factors
};

struct Layer {
  Matrix weights;
  CalibrationSet calib;
  std::vector<Eigen::Index> salient_channels;  // cluster members, ascending
};

/// Layer whose calibration activations carry `clusters` runs of high-variance channels.
Layer clustered_layer(const LayerSpec& spec, std::uint64_t seed);

/// t x m standard Gaussian activations with one token's channel q set to `magnitude`.
Matrix outlier_activations(Eigen::Index tokens, Eigen::Index channels, Eigen::Index outlier_channel,
                           double magnitude, std::uint64_t seed);

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng);

}  // namespace slimq::synthetic
