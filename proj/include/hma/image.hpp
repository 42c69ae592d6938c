#pragma once

#include <cstdint>
#include <vector>

#include "hma/error.hpp"

namespace hma {

// Interleaved 8-bit RGB image.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> rgb;

  static Image make(int width, int height, uint8_t r = 0, uint8_t g = 0,
                    uint8_t b = 0) {
    Image img;
    img.width = width;
    img.height = height;
    img.rgb.resize(static_cast<size_t>(width) * height * 3);
    for (size_t i = 0; i + 2 < img.rgb.size(); i += 3) {
      img.rgb[i] = r;
      img.rgb[i + 1] = g;
      img.rgb[i + 2] = b;
    }
    return img;
  }

  uint8_t* pixel(int row, int col) {
    return rgb.data() + (static_cast<size_t>(row) * width + col) * 3;
  }
  const uint8_t* pixel(int row, int col) const {
    return rgb.data() + (static_cast<size_t>(row) * width + col) * 3;
  }

  bool operator==(const Image& o) const = default;
};

// Bilinear resize. Throws EmptyImage on a zero-sized source.
Image resize_bilinear(const Image& src, int out_width, int out_height);

// Copies the inclusive pixel rectangle [u_min,u_max] x [v_min,v_max].
Image crop_image(const Image& src, int u_min, int v_min, int u_max, int v_max);

}  // namespace hma
