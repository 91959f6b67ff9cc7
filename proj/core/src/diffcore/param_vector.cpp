#include "admrl/diffcore/param_vector.hpp"

#include "admrl/common/error.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

namespace admrl::diff {

Layout& Layout::add(std::string name, std::size_t rows, std::size_t cols) {
  if (contains(name)) throw ContractError("duplicate layout segment '" + name + "'");
  segments_.push_back(Segment{std::move(name), total_, rows, cols});
  total_ += rows * cols;
  return *this;
}

Layout& Layout::append(const Layout& other, std::string_view prefix) {
  for (const auto& s : other.segments()) add(std::string(prefix) + s.name, s.rows, s.cols);
  return *this;
}

std::size_t Layout::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < segments_.size(); ++i)
    if (segments_[i].name == name) return i;
  throw ContractError("unknown layout segment '" + std::string(name) + "'");
}

bool Layout::contains(std::string_view name) const noexcept {
  return std::any_of(segments_.begin(), segments_.end(), [&](const Segment& s) { return s.name == name; });
}

ParamVector::ParamVector(Layout layout)
    : layout_(std::make_shared<const Layout>(std::move(layout))),
      values_(Vector::Zero(static_cast<Eigen::Index>(layout_->total_size()))) {}

ParamVector::ParamVector(std::shared_ptr<const Layout> layout, Vector values)
    : layout_(std::move(layout)), values_(std::move(values)) {
  if (static_cast<std::size_t>(values_.size()) != layout_->total_size())
    throw ShapeError("parameter array length " + std::to_string(values_.size()) + " does not match layout size " +
                     std::to_string(layout_->total_size()));
}

ParamVector ParamVector::zeros_like(const ParamVector& other) {
  return ParamVector(other.layout_, Vector::Zero(other.values_.size()));
}

Eigen::Map<const Matrix> ParamVector::block(std::size_t segment) const {
  const Segment& s = layout_->segments()[segment];
  return {values_.data() + s.offset, static_cast<Eigen::Index>(s.rows), static_cast<Eigen::Index>(s.cols)};
}

Eigen::Map<Matrix> ParamVector::block(std::size_t segment) {
  const Segment& s = layout_->segments()[segment];
  return {values_.data() + s.offset, static_cast<Eigen::Index>(s.rows), static_cast<Eigen::Index>(s.cols)};
}

bool ParamVector::bit_equal(const ParamVector& other) const {
  if (!same_layout(other) || values_.size() != other.values_.size()) return false;
  return values_.size() == 0 ||
         std::memcmp(values_.data(), other.values_.data(), sizeof(double) * static_cast<std::size_t>(values_.size())) == 0;
}

namespace {

template <typename T>
void put_le(std::ostream& out, T v) {
  static_assert(std::is_integral_v<T>);
  unsigned char bytes[sizeof(T)];
  auto u = static_cast<std::make_unsigned_t<T>>(v);
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw CheckpointError("unexpected end of parameter data");
  std::make_unsigned_t<T> u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<std::make_unsigned_t<T>>(bytes[i]) << (8 * i);
  return static_cast<T>(u);
}

}  // namespace

void write_params(std::ostream& out, const ParamVector& params) {
  const auto& segs = params.layout().segments();
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(segs.size()));
  for (const auto& s : segs) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.name.size()));
    out.write(s.name.data(), static_cast<std::streamsize>(s.name.size()));
    put_le<std::uint64_t>(out, s.offset);
    put_le<std::uint64_t>(out, s.size());
    put_le<std::uint64_t>(out, s.rows);
  }
  put_le<std::uint64_t>(out, params.size());
  for (double v : params.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
}

ParamVector read_params(std::istream& in) {
  constexpr std::uint32_t kMaxSegments = 1u << 16;
  constexpr std::uint64_t kMaxValues = 1ull << 32;
  const auto n_segments = get_le<std::uint32_t>(in);
  if (n_segments > kMaxSegments) throw CheckpointError("implausible segment count in parameter data");
  Layout layout;
  for (std::uint32_t i = 0; i < n_segments; ++i) {
    const auto len = get_le<std::uint32_t>(in);
    if (len > 4096) throw CheckpointError("implausible segment name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw CheckpointError("unexpected end of parameter data");
    const auto offset = get_le<std::uint64_t>(in);
    const auto length = get_le<std::uint64_t>(in);
    const auto rows = get_le<std::uint64_t>(in);
    if (rows == 0 ? length != 0 : length % rows != 0) throw CheckpointError("segment '" + name + "' has inconsistent shape");
    if (offset != layout.total_size()) throw CheckpointError("segment '" + name + "' has a non-contiguous offset");
    layout.add(std::move(name), rows, rows == 0 ? 0 : length / rows);
  }
  const auto count = get_le<std::uint64_t>(in);
  if (count != layout.total_size() || count > kMaxValues) throw CheckpointError("parameter count does not match layout");
  Vector values(static_cast<Eigen::Index>(count));
  for (std::uint64_t i = 0; i < count; ++i) values[static_cast<Eigen::Index>(i)] = std::bit_cast<double>(get_le<std::uint64_t>(in));
  return ParamVector(std::make_shared<const Layout>(std::move(layout)), std::move(values));
}

}  // namespace admrl::diff
