#include "homofuse/grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "homofuse/error.hpp"

namespace homofuse {

namespace {

void check_dims(int height, int width, int channels) {
  if (height <= 0 || width <= 0 || channels <= 0) {
    std::ostringstream os;
    os << "grid dimensions must be positive, got " << height << "x" << width << "x"
       << channels;
    throw Error(ErrorCode::kInvalidArgument, os.str());
  }
  const std::uint64_t n = std::uint64_t(height) * std::uint64_t(width) * std::uint64_t(channels);
  if (n > kFgridMaxElements) {
    throw Error(ErrorCode::kDimensionOverflow, "grid has too many elements");
  }
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

struct Cell {
  int x0, x1, y0, y1;
  double fx, fy;
};

Cell locate(const FeatureGrid& g, const Eigen::Vector2d& p) {
  Cell c;
  c.x0 = std::min(static_cast<int>(std::floor(p.x())), g.width() - 1);
  c.y0 = std::min(static_cast<int>(std::floor(p.y())), g.height() - 1);
  c.x1 = std::min(c.x0 + 1, g.width() - 1);
  c.y1 = std::min(c.y0 + 1, g.height() - 1);
  c.fx = p.x() - c.x0;
  c.fy = p.y() - c.y0;
  return c;
}

}  // namespace

FeatureGrid::FeatureGrid(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
  check_dims(height, width, channels);
  data_.assign(std::size_t(height) * std::size_t(width) * std::size_t(channels), fill);
}

FeatureGrid::FeatureGrid(int height, int width, int channels, std::vector<float> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  check_dims(height, width, channels);
  if (data_.size() != std::size_t(height) * std::size_t(width) * std::size_t(channels)) {
    throw Error(ErrorCode::kInvalidArgument, "grid data length does not match dimensions");
  }
  if (!std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); })) {
    throw Error(ErrorCode::kInvalidArgument, "grid values must be finite");
  }
}

Eigen::VectorXd FeatureGrid::pixel(int row, int col) const {
  Eigen::VectorXd v(channels_);
  const std::size_t base = index(row, col, 0);
  for (int c = 0; c < channels_; ++c) v[c] = data_[base + c];
  return v;
}

void FeatureGrid::set_pixel(int row, int col, const Eigen::VectorXd& value) {
  const std::size_t base = index(row, col, 0);
  for (int c = 0; c < channels_; ++c) data_[base + c] = static_cast<float>(value[c]);
}

bool FeatureGrid::contains(const Eigen::Vector2d& p) const {
  return p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= width_ - 1 && p.y() <= height_ - 1;
}

SampleResult sample_bilinear(const FeatureGrid& g, const Eigen::Vector2d& p) {
  SampleResult out;
  out.value = Eigen::VectorXd::Zero(g.channels());
  if (g.empty() || !g.contains(p)) return out;
  out.in_bounds = true;
  const Cell c = locate(g, p);
  const double w00 = (1.0 - c.fx) * (1.0 - c.fy);
  const double w10 = c.fx * (1.0 - c.fy);
  const double w01 = (1.0 - c.fx) * c.fy;
  const double w11 = c.fx * c.fy;
  for (int ch = 0; ch < g.channels(); ++ch) {
    out.value[ch] = w00 * g.at(c.y0, c.x0, ch) + w10 * g.at(c.y0, c.x1, ch) +
                    w01 * g.at(c.y1, c.x0, ch) + w11 * g.at(c.y1, c.x1, ch);
  }
  return out;
}

SampleWithGradient sample_bilinear_with_gradient(const FeatureGrid& g,
                                                 const Eigen::Vector2d& p) {
  SampleWithGradient out;
  out.sample.value = Eigen::VectorXd::Zero(g.channels());
  out.gradient = Eigen::MatrixX2d::Zero(g.channels(), 2);
  if (g.empty() || !g.contains(p)) return out;
  out.sample.in_bounds = true;
  const Cell c = locate(g, p);
  for (int ch = 0; ch < g.channels(); ++ch) {
    const double v00 = g.at(c.y0, c.x0, ch);
    const double v10 = g.at(c.y0, c.x1, ch);
    const double v01 = g.at(c.y1, c.x0, ch);
    const double v11 = g.at(c.y1, c.x1, ch);
    out.sample.value[ch] = (1.0 - c.fx) * (1.0 - c.fy) * v00 + c.fx * (1.0 - c.fy) * v10 +
                           (1.0 - c.fx) * c.fy * v01 + c.fx * c.fy * v11;
    out.gradient(ch, 0) = (1.0 - c.fy) * (v10 - v00) + c.fy * (v11 - v01);
    out.gradient(ch, 1) = (1.0 - c.fx) * (v01 - v00) + c.fx * (v11 - v10);
  }
  return out;
}

std::vector<std::uint8_t> serialize_grid(const FeatureGrid& g) {
  std::vector<std::uint8_t> out;
  out.reserve(kFgridHeaderSize + 4 * g.data().size());
  for (char ch : {'F', 'G', 'R', 'D'}) out.push_back(static_cast<std::uint8_t>(ch));
  out.push_back(1);
  put_u32(out, static_cast<std::uint32_t>(g.height()));
  put_u32(out, static_cast<std::uint32_t>(g.width()));
  put_u32(out, static_cast<std::uint32_t>(g.channels()));
  for (float v : g.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

FeatureGrid deserialize_grid(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFgridHeaderSize) {
    throw Error(ErrorCode::kMalformedHeader, "FGRID header is shorter than 17 bytes");
  }
  if (std::memcmp(bytes.data(), "FGRD", 4) != 0) {
    throw Error(ErrorCode::kMalformedHeader, "bad FGRID magic");
  }
  if (bytes[4] != 1) {
    throw Error(ErrorCode::kMalformedHeader,
                "unsupported FGRID version " + std::to_string(bytes[4]));
  }
  const std::uint32_t h = get_u32(bytes.data() + 5);
  const std::uint32_t w = get_u32(bytes.data() + 9);
  const std::uint32_t c = get_u32(bytes.data() + 13);
  if (h == 0 || w == 0 || c == 0) {
    throw Error(ErrorCode::kMalformedHeader, "FGRID dimensions must be nonzero");
  }
  const std::uint64_t n = std::uint64_t(h) * std::uint64_t(w) * std::uint64_t(c);
  if (h > 0x7fffffffu || w > 0x7fffffffu || c > 0x7fffffffu || n > kFgridMaxElements) {
    throw Error(ErrorCode::kDimensionOverflow, "FGRID dimensions overflow");
  }
  const std::uint64_t expected = kFgridHeaderSize + 4 * n;
  if (bytes.size() < expected) {
    throw Error(ErrorCode::kTruncatedPayload, "FGRID payload is truncated");
  }
  if (bytes.size() > expected) {
    throw Error(ErrorCode::kMalformedHeader, "FGRID has trailing bytes");
  }
  std::vector<float> data(n);
  const std::uint8_t* p = bytes.data() + kFgridHeaderSize;
  for (std::uint64_t i = 0; i < n; ++i, p += 4) data[i] = std::bit_cast<float>(get_u32(p));
  return FeatureGrid(int(h), int(w), int(c), std::move(data));
}

void write_grid(const std::filesystem::path& path, const FeatureGrid& g) {
  const auto bytes = serialize_grid(g);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::kIoError, "cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!os) throw Error(ErrorCode::kIoError, "failed writing " + path.string());
}

FeatureGrid read_grid(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  return deserialize_grid(bytes);
}

}  // namespace homofuse
