#include "forge/image.hpp"

#include "forge/error.hpp"

namespace forge {

Image::Image(ImageSize size, Rgb fill) : size_(size) {
  data_.resize(static_cast<std::size_t>(size.pixels()) * 3);
  for (std::size_t i = 0; i < data_.size(); i += 3) {
    data_[i] = fill[0];
    data_[i + 1] = fill[1];
    data_[i + 2] = fill[2];
  }
}

Image::Image(ImageSize size, std::vector<std::uint8_t> rgb)
    : size_(size), data_(std::move(rgb)) {
  if (data_.size() != static_cast<std::size_t>(size.pixels()) * 3) {
    throw ValidationError("image", "pixel buffer does not match " +
                                       std::to_string(size.height) + "x" +
                                       std::to_string(size.width));
  }
}

Image downsample_area(const Image& image, int factor) {
  if (factor <= 0 || image.height() % factor != 0 ||
      image.width() % factor != 0) {
    throw ValidationError("image", "downsample factor " +
                                       std::to_string(factor) +
                                       " does not divide image size");
  }
  const ImageSize out_size{image.height() / factor, image.width() / factor};
  Image out(out_size);
  const int area = factor * factor;
  for (int oy = 0; oy < out_size.height; ++oy) {
    for (int ox = 0; ox < out_size.width; ++ox) {
      int sum[3] = {0, 0, 0};
      for (int dy = 0; dy < factor; ++dy) {
        for (int dx = 0; dx < factor; ++dx) {
          const Rgb c = image.at(ox * factor + dx, oy * factor + dy);
          sum[0] += c[0];
          sum[1] += c[1];
          sum[2] += c[2];
        }
      }
      out.set(ox, oy,
              {static_cast<std::uint8_t>((sum[0] + area / 2) / area),
               static_cast<std::uint8_t>((sum[1] + area / 2) / area),
               static_cast<std::uint8_t>((sum[2] + area / 2) / area)});
    }
  }
  return out;
}

}  // namespace forge
