#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace oodshape {

enum class DType { F32, F64 };

/// Dense row-major tensor of rank 1 or 2 holding 64-bit floats.
///
/// Construction validates the shape/length invariant and rejects NaN/Inf,
/// so every live Tensor is finite.
class Tensor {
public:
  Tensor(std::vector<std::size_t> shape, std::vector<double> data,
         DType dtype_origin = DType::F64);

  const std::vector<std::size_t> &shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  DType dtype_origin() const { return dtype_origin_; }

  std::span<const double> data() const { return data_; }

  // Row access for rank-2 tensors.
  std::size_t rows() const { return shape_[0]; }
  std::size_t cols() const { return rank() == 2 ? shape_[1] : 1; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols(), cols()};
  }

  friend bool operator==(const Tensor &, const Tensor &) = default;

private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
  DType dtype_origin_;
};

/// Reads a `.npy` (format 1.0) file holding little-endian `<f4` or `<f8`
/// data in C order. f32 payloads are widened to f64.
Tensor load_tensor(const std::filesystem::path &path);

/// Writes `t` as a format 1.0 `.npy` file with `<f8` payload.
void save_tensor(const Tensor &t, const std::filesystem::path &path);

/// N x M penultimate-layer features plus the name of the dataset they came from.
class FeatureMatrix {
public:
  FeatureMatrix(Tensor features, std::string source_tag);
  FeatureMatrix(std::string source_tag, std::size_t n_samples,
                std::size_t feature_dim, std::vector<double> data);

  const Tensor &features() const { return features_; }
  const std::string &source_tag() const { return source_tag_; }
  std::size_t n_samples() const { return features_.rows(); }
  std::size_t feature_dim() const { return features_.cols(); }
  std::span<const double> row(std::size_t i) const { return features_.row(i); }

  /// New matrix holding the given rows in the given order.
  FeatureMatrix select_rows(std::span<const std::size_t> rows) const;

private:
  Tensor features_;
  std::string source_tag_;
};

/// Final linear layer: logits = W z + b, W is C x M.
class LinearClassifier {
public:
  LinearClassifier(Tensor weights, Tensor bias);
  LinearClassifier(std::size_t n_classes, std::size_t feature_dim,
                   std::vector<double> weights, std::vector<double> bias);

  const Tensor &weights() const { return weights_; }
  const Tensor &bias() const { return bias_; }
  std::size_t n_classes() const { return weights_.rows(); }
  std::size_t feature_dim() const { return weights_.cols(); }
  std::span<const double> weight_row(std::size_t c) const { return weights_.row(c); }

private:
  Tensor weights_;
  Tensor bias_;
};

struct DatasetEntry {
  std::string name;
  std::filesystem::path features_path;
};

FeatureMatrix load_dataset(const DatasetEntry &entry);

LinearClassifier load_classifier(const std::filesystem::path &weights_path,
                                 const std::filesystem::path &bias_path);

} // namespace oodshape
