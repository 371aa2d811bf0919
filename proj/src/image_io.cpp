#include "homofuse/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "homofuse/error.hpp"

namespace homofuse {

namespace {

// Header tokens are whitespace separated; '#' starts a comment running to
// the end of the line.
class PnmHeaderReader {
 public:
  explicit PnmHeaderReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::string token() {
    skip_space_and_comments();
    std::string out;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_]) && bytes_[pos_] != '#') {
      out.push_back(static_cast<char>(bytes_[pos_++]));
    }
    if (out.empty()) throw Error(ErrorCode::kMalformedHeader, "truncated PNM header");
    return out;
  }

  int integer() {
    const std::string t = token();
    if (!std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(c); }) ||
        t.size() > 9) {
      throw Error(ErrorCode::kMalformedHeader, "bad PNM header field '" + t + "'");
    }
    return std::stoi(t);
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw Error(ErrorCode::kMalformedHeader, "missing PNM raster separator");
    }
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

FeatureGrid decode_pnm(const std::vector<std::uint8_t>& bytes) {
  PnmHeaderReader reader(bytes);
  const std::string magic = reader.token();
  int channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw Error(ErrorCode::kMalformedHeader, "unsupported PNM magic '" + magic + "'");
  }
  const int width = reader.integer();
  const int height = reader.integer();
  const int maxval = reader.integer();
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 255) {
    throw Error(ErrorCode::kMalformedHeader, "unsupported PNM dimensions or maxval");
  }
  const std::size_t offset = reader.raster_offset();
  const std::uint64_t n = std::uint64_t(width) * std::uint64_t(height) * std::uint64_t(channels);
  if (n > kFgridMaxElements) throw Error(ErrorCode::kDimensionOverflow, "PNM too large");
  if (bytes.size() < offset + n) {
    throw Error(ErrorCode::kTruncatedPayload, "PNM raster is truncated");
  }
  std::vector<float> data(n);
  const double inv = 1.0 / maxval;
  for (std::uint64_t i = 0; i < n; ++i) {
    data[i] = static_cast<float>(bytes[offset + i] * inv);
  }
  return FeatureGrid(height, width, channels, std::move(data));
}

}  // namespace

FeatureGrid read_pnm(const std::filesystem::path& path) { return decode_pnm(slurp(path)); }

void write_pnm(const std::filesystem::path& path, const FeatureGrid& g, double scale) {
  if (g.channels() != 1 && g.channels() != 3) {
    throw Error(ErrorCode::kInvalidArgument, "PNM export needs 1 or 3 channels");
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::kIoError, "cannot open " + path.string() + " for writing");
  os << (g.channels() == 1 ? "P5" : "P6") << "\n" << g.width() << " " << g.height() << "\n255\n";
  std::vector<char> raster;
  raster.reserve(g.data().size());
  for (float v : g.data()) {
    const double x = std::clamp(v * scale, 0.0, 1.0);
    raster.push_back(static_cast<char>(static_cast<std::uint8_t>(std::lround(x * 255.0))));
  }
  os.write(raster.data(), std::streamsize(raster.size()));
  if (!os) throw Error(ErrorCode::kIoError, "failed writing " + path.string());
}

FeatureGrid read_any(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  if (bytes.size() >= 4 && bytes[0] == 'F' && bytes[1] == 'G' && bytes[2] == 'R' &&
      bytes[3] == 'D') {
    return deserialize_grid(bytes);
  }
  return decode_pnm(bytes);
}

FeatureGrid downsample_box(const FeatureGrid& g, int factor) {
  if (factor <= 0) throw Error(ErrorCode::kInvalidArgument, "downsample factor must be >= 1");
  if (factor == 1) return g;
  const int h = g.height() / factor;
  const int w = g.width() / factor;
  if (h == 0 || w == 0) {
    throw Error(ErrorCode::kInvalidArgument, "downsample factor exceeds image size");
  }
  FeatureGrid out(h, w, g.channels());
  const double inv = 1.0 / (factor * factor);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (int ch = 0; ch < g.channels(); ++ch) {
        double acc = 0.0;
        for (int dr = 0; dr < factor; ++dr) {
          for (int dc = 0; dc < factor; ++dc) acc += g.at(r * factor + dr, c * factor + dc, ch);
        }
        out.at(r, c, ch) = static_cast<float>(acc * inv);
      }
    }
  }
  return out;
}

}  // namespace homofuse
