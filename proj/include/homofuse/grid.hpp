#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace homofuse {

/// Dense H x W x C feature map. Storage is row-major with channels fastest,
/// held in single precision to match the on-disk FGRID payload; all
/// interpolation arithmetic runs in double.
class FeatureGrid {
 public:
  FeatureGrid() = default;
  FeatureGrid(int height, int width, int channels, float fill = 0.0f);
  FeatureGrid(int height, int width, int channels, std::vector<float> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }

  float at(int row, int col, int channel) const {
    return data_[index(row, col, channel)];
  }
  float& at(int row, int col, int channel) { return data_[index(row, col, channel)]; }

  /// All channels of one pixel.
  Eigen::VectorXd pixel(int row, int col) const;
  void set_pixel(int row, int col, const Eigen::VectorXd& value);

  /// Closed rectangle [0, W-1] x [0, H-1].
  bool contains(const Eigen::Vector2d& p) const;

  bool operator==(const FeatureGrid&) const = default;

 private:
  std::size_t index(int row, int col, int channel) const {
    return (static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(col)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(channel);
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

struct SampleResult {
  Eigen::VectorXd value;
  bool in_bounds = false;
};

struct SampleWithGradient {
  SampleResult sample;
  Eigen::MatrixX2d gradient;  // C x 2, columns d/du and d/dv
};

/// Bilinear lookup at continuous pixel p = (u, v) -> (col u, row v).
/// Out-of-bounds points yield a zero vector and in_bounds = false.
SampleResult sample_bilinear(const FeatureGrid& g, const Eigen::Vector2d& p);

/// Bilinear lookup plus the analytic derivative of the bilinear surface in
/// the containing cell. On a cell boundary the cell to the lower right is
/// used; on the last row/column the edge samples are duplicated.
SampleWithGradient sample_bilinear_with_gradient(const FeatureGrid& g,
                                                 const Eigen::Vector2d& p);

// FGRID binary format: "FGRD", version byte (1), u32 height, width, channels
// (little endian), then height*width*channels little-endian float32 values.
inline constexpr std::size_t kFgridHeaderSize = 17;
inline constexpr std::uint64_t kFgridMaxElements = std::uint64_t{1} << 31;

std::vector<std::uint8_t> serialize_grid(const FeatureGrid& g);
FeatureGrid deserialize_grid(std::span<const std::uint8_t> bytes);

void write_grid(const std::filesystem::path& path, const FeatureGrid& g);
FeatureGrid read_grid(const std::filesystem::path& path);

}  // namespace homofuse
