#ifndef READMEM_EMBEDDING_HPP
#define READMEM_EMBEDDING_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>

#include "readmem/errors.hpp"

namespace readmem {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowMajorMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Channel counts and flattened spatial size shared by every embedding of one engine.
struct ShapeSpec {
  Index channels_key = 1;
  Index channels_value = 1;
  Index spatial = 1;

  void validate() const {
    if (channels_key < 1 || channels_value < 1 || spatial < 1) {
      throw ShapeError("shape: channels_key, channels_value and spatial must all be >= 1 (got " +
                       to_string() + ")");
    }
  }

  std::string to_string() const {
    return "C_k=" + std::to_string(channels_key) + " C_v=" + std::to_string(channels_value) +
           " HW=" + std::to_string(spatial);
  }

  friend bool operator==(const ShapeSpec&, const ShapeSpec&) = default;
};

struct KeyTag {
  static Index rows(const ShapeSpec& s) { return s.channels_key; }
  static constexpr const char* kName = "key";
};

struct ValueTag {
  static Index rows(const ShapeSpec& s) { return s.channels_value; }
  static constexpr const char* kName = "value";
};

/// A validated channels x spatial feature matrix tagged with its source frame.
///
/// Keys and values share the representation but are distinct types so a value
/// can never be passed where a key is expected. Instances are immutable.
template <typename Scalar, typename Tag>
class Embedding {
 public:
  Embedding(Matrix<Scalar> data, const ShapeSpec& shape, std::int64_t frame_index)
      : data_(std::move(data)), shape_(shape), frame_index_(frame_index) {
    shape_.validate();
    if (data_.rows() != Tag::rows(shape_) || data_.cols() != shape_.spatial) {
      throw ShapeError(std::string(Tag::kName) + ": expected " + std::to_string(Tag::rows(shape_)) +
                       "x" + std::to_string(shape_.spatial) + " matrix, got " +
                       std::to_string(data_.rows()) + "x" + std::to_string(data_.cols()));
    }
    if (!data_.allFinite()) {
      throw NonFiniteError(std::string(Tag::kName) + ": non-finite entry");
    }
    if (frame_index_ < 0) {
      throw ShapeError(std::string(Tag::kName) + ": negative frame index");
    }
  }

  const Matrix<Scalar>& data() const { return data_; }
  const ShapeSpec& shape() const { return shape_; }
  std::int64_t frame_index() const { return frame_index_; }
  Index channels() const { return data_.rows(); }
  Index spatial() const { return data_.cols(); }

  /// Same shape and frame, different entries.
  Embedding with_data(Matrix<Scalar> data) const { return Embedding(std::move(data), shape_, frame_index_); }

 private:
  Matrix<Scalar> data_;
  ShapeSpec shape_;
  std::int64_t frame_index_;
};

template <typename Scalar>
using KeyEmbedding = Embedding<Scalar, KeyTag>;
template <typename Scalar>
using ValueEmbedding = Embedding<Scalar, ValueTag>;

template <typename Scalar>
KeyEmbedding<Scalar> new_key(Matrix<Scalar> raw, const ShapeSpec& shape, std::int64_t frame_index) {
  return KeyEmbedding<Scalar>(std::move(raw), shape, frame_index);
}

template <typename Scalar>
ValueEmbedding<Scalar> new_value(Matrix<Scalar> raw, const ShapeSpec& shape, std::int64_t frame_index) {
  return ValueEmbedding<Scalar>(std::move(raw), shape, frame_index);
}

/// Scales the key so its flattened vector has unit Euclidean norm.
template <typename Scalar>
KeyEmbedding<Scalar> normalize_key(const KeyEmbedding<Scalar>& k) {
  const Scalar norm = k.data().norm();
  if (!(norm > Scalar(0))) {
    throw ZeroNormError("normalize_key: zero-norm key at frame " + std::to_string(k.frame_index()));
  }
  return k.with_data(k.data() / norm);
}

/// Row-major concatenation: channel 0 across all positions, then channel 1, ...
template <typename Scalar, typename Tag>
Vector<Scalar> flatten(const Embedding<Scalar, Tag>& e) {
  Vector<Scalar> out(e.data().size());
  Eigen::Map<RowMajorMatrix<Scalar>>(out.data(), e.channels(), e.spatial()) = e.data();
  return out;
}

template <typename Scalar>
KeyEmbedding<Scalar> unflatten_key(const Vector<Scalar>& flat, const ShapeSpec& shape,
                                   std::int64_t frame_index) {
  shape.validate();
  if (flat.size() != shape.channels_key * shape.spatial) {
    throw ShapeError("unflatten_key: vector length " + std::to_string(flat.size()) +
                     " does not match " + shape.to_string());
  }
  Matrix<Scalar> data =
      Eigen::Map<const RowMajorMatrix<Scalar>>(flat.data(), shape.channels_key, shape.spatial);
  return KeyEmbedding<Scalar>(std::move(data), shape, frame_index);
}

template <typename Scalar, typename Tag>
void require_same_shape(const Embedding<Scalar, Tag>& a, const Embedding<Scalar, Tag>& b,
                        const char* where) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError(std::string(where) + ": shape mismatch (" + a.shape().to_string() + " vs " +
                     b.shape().to_string() + ")");
  }
}

}  // namespace readmem

#endif  // READMEM_EMBEDDING_HPP
