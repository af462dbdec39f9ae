#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>

namespace slimq {

// Row-major so that a weight row (one output channel) is contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Worker count used when a caller passes 0: SLIMQ_THREADS if set, else 1.
unsigned default_threads();

/// Runs body(begin, end) over [0, count) split into contiguous chunks, one per worker.
/// Chunks are disjoint, so results written per index are independent of the split.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace slimq
