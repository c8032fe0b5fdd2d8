#include "oodshape/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include "oodshape/error.hpp"

namespace oodshape {

namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;

template <typename T> T from_little_endian(const char *bytes) {
  T value;
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(&value, bytes, sizeof(T));
  } else {
    char swapped[sizeof(T)];
    std::reverse_copy(bytes, bytes + sizeof(T), swapped);
    std::memcpy(&value, swapped, sizeof(T));
  }
  return value;
}

template <typename T> void to_little_endian(T value, char *bytes) {
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native != std::endian::little)
    std::reverse(bytes, bytes + sizeof(T));
}

std::size_t shape_product(const std::vector<std::size_t> &shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

// Value of `key` in the python-literal header dict, up to the next ',' or
// matching ')' for tuples.
std::string header_value(const std::string &header, const std::string &key,
                         const std::filesystem::path &path) {
  const std::string quoted = "'" + key + "'";
  auto pos = header.find(quoted);
  if (pos == std::string::npos)
    throw UnsupportedFormat(path.string() + ": header lacks key " + quoted);
  pos = header.find(':', pos + quoted.size());
  if (pos == std::string::npos)
    throw UnsupportedFormat(path.string() + ": malformed header");
  ++pos;
  while (pos < header.size() && header[pos] == ' ')
    ++pos;
  std::size_t end;
  if (pos < header.size() && header[pos] == '(') {
    end = header.find(')', pos);
    if (end == std::string::npos)
      throw UnsupportedFormat(path.string() + ": malformed shape tuple");
    ++end;
  } else {
    end = header.find_first_of(",}", pos);
    if (end == std::string::npos)
      throw UnsupportedFormat(path.string() + ": malformed header");
  }
  auto value = header.substr(pos, end - pos);
  while (!value.empty() && value.back() == ' ')
    value.pop_back();
  return value;
}

std::vector<std::size_t> parse_shape(const std::string &tuple,
                                     const std::filesystem::path &path) {
  std::vector<std::size_t> shape;
  std::string inner = tuple.substr(1, tuple.size() - 2);
  std::stringstream ss(inner);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto first = item.find_first_not_of(' ');
    if (first == std::string::npos)
      continue;
    auto last = item.find_last_not_of(' ');
    item = item.substr(first, last - first + 1);
    if (!std::all_of(item.begin(), item.end(), [](char ch) { return ch >= '0' && ch <= '9'; }))
      throw UnsupportedFormat(path.string() + ": bad shape entry '" + item + "'");
    shape.push_back(static_cast<std::size_t>(std::stoull(item)));
  }
  return shape;
}

} // namespace

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data,
               DType dtype_origin)
    : shape_(std::move(shape)), data_(std::move(data)), dtype_origin_(dtype_origin) {
  if (shape_.empty() || shape_.size() > 2)
    throw RankMismatch("tensor rank must be 1 or 2, got " + std::to_string(shape_.size()));
  if (shape_product(shape_) != data_.size())
    throw LengthMismatch("shape product " + std::to_string(shape_product(shape_)) +
                         " != data length " + std::to_string(data_.size()));
  for (std::size_t i = 0; i < data_.size(); ++i)
    if (!std::isfinite(data_[i]))
      throw NonFiniteValue(i);
}

Tensor load_tensor(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoFailure("cannot open " + path.string());

  char preamble[10];
  if (!in.read(preamble, sizeof(preamble)))
    throw UnsupportedFormat(path.string() + ": file shorter than npy preamble");
  if (std::memcmp(preamble, kMagic, kMagicLen) != 0)
    throw UnsupportedFormat(path.string() + ": bad magic");
  if (preamble[6] != 1 || preamble[7] != 0)
    throw UnsupportedFormat(path.string() + ": only npy format version 1.0 is supported");
  const auto header_len = from_little_endian<std::uint16_t>(preamble + 8);

  std::string header(header_len, '\0');
  if (!in.read(header.data(), header_len))
    throw UnsupportedFormat(path.string() + ": truncated header");

  const auto descr = header_value(header, "descr", path);
  DType dtype;
  std::size_t item_size;
  if (descr == "'<f8'") {
    dtype = DType::F64;
    item_size = 8;
  } else if (descr == "'<f4'") {
    dtype = DType::F32;
    item_size = 4;
  } else {
    throw UnsupportedFormat(path.string() + ": unsupported dtype " + descr);
  }
  if (header_value(header, "fortran_order", path) != "False")
    throw UnsupportedFormat(path.string() + ": Fortran-ordered arrays are not supported");

  const auto shape = parse_shape(header_value(header, "shape", path), path);
  if (shape.empty() || shape.size() > 2)
    throw UnsupportedFormat(path.string() + ": rank " + std::to_string(shape.size()) +
                            " not supported (expected 1 or 2)");
  const std::size_t count = shape_product(shape);

  std::vector<char> raw(count * item_size);
  if (!in.read(raw.data(), static_cast<std::streamsize>(raw.size())))
    throw UnsupportedFormat(path.string() + ": payload shorter than declared shape");
  if (in.peek() != std::ifstream::traits_type::eof())
    throw UnsupportedFormat(path.string() + ": trailing bytes after payload");

  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    const char *p = raw.data() + i * item_size;
    data[i] = dtype == DType::F64 ? from_little_endian<double>(p)
                                  : static_cast<double>(from_little_endian<float>(p));
  }
  return Tensor(shape, std::move(data), dtype);
}

void save_tensor(const Tensor &t, const std::filesystem::path &path) {
  std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': (";
  for (auto dim : t.shape())
    header += std::to_string(dim) + ", ";
  if (t.rank() > 1) {
    header.pop_back();
    header.pop_back();
  } else {
    header.pop_back();
  }
  header += "), }";
  // Pad so that magic + version + length + header is a multiple of 64,
  // terminated by a newline.
  const std::size_t unpadded = kMagicLen + 2 + 2 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoFailure("cannot open " + path.string() + " for writing");

  char preamble[10];
  std::memcpy(preamble, kMagic, kMagicLen);
  preamble[6] = 1;
  preamble[7] = 0;
  to_little_endian(static_cast<std::uint16_t>(header.size()), preamble + 8);
  out.write(preamble, sizeof(preamble));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));

  std::vector<char> raw(t.size() * sizeof(double));
  for (std::size_t i = 0; i < t.size(); ++i)
    to_little_endian(t.data()[i], raw.data() + i * sizeof(double));
  out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (!out)
    throw IoFailure("write failed for " + path.string());
}

FeatureMatrix::FeatureMatrix(Tensor features, std::string source_tag)
    : features_(std::move(features)), source_tag_(std::move(source_tag)) {
  if (features_.rank() != 2)
    throw RankMismatch(source_tag_ + ": features must be rank 2, got rank " +
                       std::to_string(features_.rank()));
  if (n_samples() == 0 || feature_dim() == 0)
    throw EmptyInput(source_tag_ + ": feature matrix needs N >= 1 and M >= 1");
}

FeatureMatrix::FeatureMatrix(std::string source_tag, std::size_t n_samples,
                             std::size_t feature_dim, std::vector<double> data)
    : FeatureMatrix(Tensor({n_samples, feature_dim}, std::move(data)), std::move(source_tag)) {}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> rows) const {
  std::vector<double> data;
  data.reserve(rows.size() * feature_dim());
  for (auto r : rows) {
    if (r >= n_samples())
      throw InvalidArgument("row index " + std::to_string(r) + " out of range");
    auto src = row(r);
    data.insert(data.end(), src.begin(), src.end());
  }
  return FeatureMatrix(source_tag_, rows.size(), feature_dim(), std::move(data));
}

LinearClassifier::LinearClassifier(Tensor weights, Tensor bias)
    : weights_(std::move(weights)), bias_(std::move(bias)) {
  if (weights_.rank() != 2)
    throw RankMismatch("classifier weights must be rank 2");
  if (bias_.rank() != 1)
    throw RankMismatch("classifier bias must be rank 1");
  if (n_classes() < 2)
    throw InvalidArgument("classifier needs at least 2 classes");
  if (bias_.size() != n_classes())
    throw LengthMismatch("bias length " + std::to_string(bias_.size()) +
                         " != number of classes " + std::to_string(n_classes()));
}

LinearClassifier::LinearClassifier(std::size_t n_classes, std::size_t feature_dim,
                                   std::vector<double> weights, std::vector<double> bias)
    : LinearClassifier(Tensor({n_classes, feature_dim}, std::move(weights)),
                       Tensor({n_classes}, std::move(bias))) {}

FeatureMatrix load_dataset(const DatasetEntry &entry) {
  auto tensor = load_tensor(entry.features_path);
  if (tensor.rank() != 2)
    throw RankMismatch(entry.features_path.string() + ": dataset '" + entry.name +
                       "' must be rank 2");
  return FeatureMatrix(std::move(tensor), entry.name);
}

LinearClassifier load_classifier(const std::filesystem::path &weights_path,
                                 const std::filesystem::path &bias_path) {
  return LinearClassifier(load_tensor(weights_path), load_tensor(bias_path));
}

} // namespace oodshape
