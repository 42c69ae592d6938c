#include "hma/image.hpp"

#include <algorithm>
#include <cmath>

namespace hma {

Image resize_bilinear(const Image& src, int out_width, int out_height) {
  if (src.width < 1 || src.height < 1 || src.rgb.empty())
    throw EmptyImage("source image has no pixels");
  Image out;
  out.width = out_width;
  out.height = out_height;
  out.rgb.resize(static_cast<size_t>(out_width) * out_height * 3);

  // Pixel-center sampling: output center maps to source center.
  const double sx = static_cast<double>(src.width) / out_width;
  const double sy = static_cast<double>(src.height) / out_height;

  for (int r = 0; r < out_height; ++r) {
    double fy = (r + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(src.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - y0;
    for (int c = 0; c < out_width; ++c) {
      double fx = (c + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(src.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - x0;
      const uint8_t* p00 = src.pixel(y0, x0);
      const uint8_t* p01 = src.pixel(y0, x1);
      const uint8_t* p10 = src.pixel(y1, x0);
      const uint8_t* p11 = src.pixel(y1, x1);
      uint8_t* dst = out.pixel(r, c);
      for (int ch = 0; ch < 3; ++ch) {
        const double top = p00[ch] * (1.0 - wx) + p01[ch] * wx;
        const double bot = p10[ch] * (1.0 - wx) + p11[ch] * wx;
        const double v = top * (1.0 - wy) + bot * wy;
        dst[ch] = static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
      }
    }
  }
  return out;
}

Image crop_image(const Image& src, int u_min, int v_min, int u_max, int v_max) {
  Image out;
  out.width = u_max - u_min + 1;
  out.height = v_max - v_min + 1;
  out.rgb.resize(static_cast<size_t>(out.width) * out.height * 3);
  for (int r = 0; r < out.height; ++r)
    std::copy_n(src.pixel(v_min + r, u_min), static_cast<size_t>(out.width) * 3,
                out.pixel(r, 0));
  return out;
}

}  // namespace hma
