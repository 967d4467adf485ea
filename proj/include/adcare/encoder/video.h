#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace adcare::encoder {

/// Raw frame stack, F x H x W x C, values in [0, 1], row-major.
struct VideoSample {
  std::string id;
  std::size_t frames = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> pixels;

  double at(std::size_t f, std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[((f * height + y) * width + x) * channels + c];
  }
  double& at(std::size_t f, std::size_t y, std::size_t x, std::size_t c) {
    return pixels[((f * height + y) * width + x) * channels + c];
  }
};

struct FrameGeometry {
  std::size_t frames = 8;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t channels = 3;
  std::size_t patch_size = 8;

  std::size_t grid_h() const { return height / patch_size; }
  std::size_t grid_w() const { return width / patch_size; }
  std::size_t patches() const { return grid_h() * grid_w(); }
};

/// Metadata-only check that a geometry can be patchified. Throws ConfigError
/// naming H, W and p when the frame is not divisible by the patch size.
void validate_geometry(const FrameGeometry& g);

}  // namespace adcare::encoder
