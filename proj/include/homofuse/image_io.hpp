#pragma once

#include <filesystem>

#include "homofuse/grid.hpp"

namespace homofuse {

/// Reads a binary PGM (P5, one channel) or PPM (P6, three channels) with
/// maxval <= 255, mapping samples to [0, 1] by division by maxval.
FeatureGrid read_pnm(const std::filesystem::path& path);

/// Writes a 1-channel grid as P5 or a 3-channel grid as P6, clamping to
/// [0, 1] after multiplying by `scale`.
void write_pnm(const std::filesystem::path& path, const FeatureGrid& g, double scale = 1.0);

/// Loads either format based on content: FGRID magic, else PNM.
FeatureGrid read_any(const std::filesystem::path& path);

/// Box-filter downsample by an integer factor; trailing rows/columns that do
/// not fill a whole block are dropped. factor == 1 returns a copy.
FeatureGrid downsample_box(const FeatureGrid& g, int factor);

}  // namespace homofuse
