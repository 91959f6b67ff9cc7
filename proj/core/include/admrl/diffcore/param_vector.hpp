#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace admrl::diff {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A named rows x cols block inside a flat parameter array (column-major).
struct Segment {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const noexcept { return rows * cols; }
  bool operator==(const Segment&) const = default;
};

class Layout {
 public:
  Layout() = default;

  /// Appends a segment after the current end. Names must be unique.
  Layout& add(std::string name, std::size_t rows, std::size_t cols);

  /// Appends every segment of `other`, prefixing each name.
  Layout& append(const Layout& other, std::string_view prefix = {});

  const std::vector<Segment>& segments() const noexcept { return segments_; }
  std::size_t total_size() const noexcept { return total_; }
  std::size_t index_of(std::string_view name) const;
  const Segment& at(std::string_view name) const { return segments_[index_of(name)]; }
  bool contains(std::string_view name) const noexcept;

  bool operator==(const Layout&) const = default;

 private:
  std::vector<Segment> segments_;
  std::size_t total_ = 0;
};

/// Flat real parameter vector plus the layout that names its blocks.
/// Copies share the (immutable) layout.
class ParamVector {
 public:
  ParamVector() : layout_(std::make_shared<const Layout>()) {}
  explicit ParamVector(Layout layout);
  ParamVector(std::shared_ptr<const Layout> layout, Vector values);

  static ParamVector zeros_like(const ParamVector& other);

  const Layout& layout() const noexcept { return *layout_; }
  const std::shared_ptr<const Layout>& shared_layout() const noexcept { return layout_; }
  const Vector& values() const noexcept { return values_; }
  Vector& values() noexcept { return values_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }

  Eigen::Map<const Matrix> block(std::size_t segment) const;
  Eigen::Map<Matrix> block(std::size_t segment);
  Eigen::Map<const Matrix> block(std::string_view name) const { return block(layout_->index_of(name)); }
  Eigen::Map<Matrix> block(std::string_view name) { return block(layout_->index_of(name)); }

  bool all_finite() const noexcept { return values_.allFinite(); }
  bool same_layout(const ParamVector& other) const noexcept {
    return layout_ == other.layout_ || *layout_ == *other.layout_;
  }

  /// Bitwise equality of values and structural equality of layouts.
  bool bit_equal(const ParamVector& other) const;

 private:
  std::shared_ptr<const Layout> layout_;
  Vector values_;
};

/// Binary format: u32 segment count; per segment {u32 name length, name
/// bytes, u64 offset, u64 length, u64 rows}; u64 value count; then the
/// values as little-endian IEEE-754 binary64.
void write_params(std::ostream& out, const ParamVector& params);
ParamVector read_params(std::istream& in);

}  // namespace admrl::diff
