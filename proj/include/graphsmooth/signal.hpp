#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <utility>

#include "graphsmooth/graph.hpp"

namespace graphsmooth {

/// A batch of M node-domain measurement vectors (row m = x[m]^T). Values are
/// immutable after construction. The GFT image is computed on first request
/// and cached; the cache is guarded by a mutex so concurrent readers get the
/// same matrix (compute-once).
class SignalBatch {
 public:
  explicit SignalBatch(Matrix values) : values_(std::move(values)) {}

  SignalBatch(const SignalBatch& other) : values_(other.values_) {}
  SignalBatch& operator=(const SignalBatch& other) {
    if (this != &other) {
      values_ = other.values_;
      std::scoped_lock lock(mutex_);
      gft_cache_.reset();
      cache_key_ = nullptr;
    }
    return *this;
  }

  int n_samples() const { return static_cast<int>(values_.rows()); }
  int n_nodes() const { return static_cast<int>(values_.cols()); }
  const Matrix& values() const { return values_; }

  /// Rows of the result are the GFT images x~[m]^T = (V^T x[m])^T. The cache
  /// is keyed on the spectrum identity; passing a different spectrum of the
  /// same size recomputes.
  std::shared_ptr<const Matrix> gft_values(const SpectralGraph& sg) const {
    if (n_nodes() != sg.n_nodes()) {
      fail(ErrorCode::DimensionMismatch,
           "batch has " + std::to_string(n_nodes()) + " columns, graph has " +
               std::to_string(sg.n_nodes()) + " nodes");
    }
    std::scoped_lock lock(mutex_);
    const void* key = sg.eigenvectors().data();
    if (!gft_cache_ || cache_key_ != key) {
      gft_cache_ = std::make_shared<Matrix>(values_ * sg.eigenvectors());
      cache_key_ = key;
    }
    return gft_cache_;
  }

 private:
  Matrix values_;
  mutable std::mutex mutex_;
  mutable std::shared_ptr<const Matrix> gft_cache_;
  mutable const void* cache_key_ = nullptr;
};

}  // namespace graphsmooth
