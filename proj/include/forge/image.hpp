#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace forge {

struct ImageSize {
  int height = 0;
  int width = 0;

  long long pixels() const { return static_cast<long long>(height) * width; }
  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

using Rgb = std::array<std::uint8_t, 3>;

// Integer pixel rectangle; x/y is the top-left corner.
struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  int right() const { return x + w; }
  int bottom() const { return y + h; }
  bool empty() const { return w <= 0 || h <= 0; }
  bool contains(int px, int py) const {
    return px >= x && px < x + w && py >= y && py < y + h;
  }
  bool inside(ImageSize size) const {
    return x >= 0 && y >= 0 && w > 0 && h > 0 && right() <= size.width &&
           bottom() <= size.height;
  }
  friend bool operator==(const Rect&, const Rect&) = default;
};

// 8-bit RGB raster, row-major, interleaved channels.
class Image {
 public:
  Image() = default;
  Image(ImageSize size, Rgb fill = {0, 0, 0});
  Image(ImageSize size, std::vector<std::uint8_t> rgb);

  ImageSize size() const { return size_; }
  int height() const { return size_.height; }
  int width() const { return size_.width; }

  Rgb at(int x, int y) const {
    const auto* p = &data_[offset(x, y)];
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, Rgb c) {
    auto* p = &data_[offset(x, y)];
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }

  std::span<const std::uint8_t> bytes() const { return data_; }
  std::span<std::uint8_t> bytes() { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * size_.width + x) * 3;
  }

  ImageSize size_;
  std::vector<std::uint8_t> data_;
};

// Area-average downsample by an integer factor; sizes must divide evenly.
Image downsample_area(const Image& image, int factor);

}  // namespace forge
