#include "forge/mask.hpp"

#include <algorithm>
#include <numeric>

#include "forge/error.hpp"

namespace forge {

Mask::Mask(ImageSize size, bool value)
    : size_(size),
      bits_(static_cast<std::size_t>(size.pixels()), value ? 1 : 0) {}

void Mask::fill_rect(const Rect& r, bool v) {
  const int x0 = std::max(0, r.x);
  const int y0 = std::max(0, r.y);
  const int x1 = std::min(size_.width, r.right());
  const int y1 = std::min(size_.height, r.bottom());
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) set(x, y, v);
  }
}

long long Mask::count() const {
  return std::accumulate(bits_.begin(), bits_.end(), 0LL);
}

std::optional<Rect> Mask::bbox() const {
  int x0 = size_.width, y0 = size_.height, x1 = -1, y1 = -1;
  for (int y = 0; y < size_.height; ++y) {
    for (int x = 0; x < size_.width; ++x) {
      if (!at(x, y)) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return std::nullopt;
  return Rect{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

bool Mask::subset_of(const Mask& other) const {
  if (size_ != other.size_) return false;
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i] && !other.bits_[i]) return false;
  }
  return true;
}

bool Mask::disjoint_from(const Mask& other) const {
  if (size_ != other.size_) return false;
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i] && other.bits_[i]) return false;
  }
  return true;
}

Mask mask_union(std::span<const Mask> masks, ImageSize size) {
  Mask out(size);
  for (const auto& m : masks) {
    if (m.size() != size) {
      throw ValidationError("segmentation", "mask size mismatch in union");
    }
    for (int y = 0; y < size.height; ++y) {
      for (int x = 0; x < size.width; ++x) {
        if (m.at(x, y)) out.set(x, y);
      }
    }
  }
  return out;
}

Mask mask_from_rect(ImageSize size, const Rect& r) {
  Mask m(size);
  m.fill_rect(r);
  return m;
}

Mask downsample_any(const Mask& mask, int factor) {
  if (factor <= 0 || mask.height() % factor != 0 ||
      mask.width() % factor != 0) {
    throw ValidationError("segmentation", "mask downsample factor " +
                                              std::to_string(factor) +
                                              " does not divide mask size");
  }
  Mask out({mask.height() / factor, mask.width() / factor});
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.at(x, y)) out.set(x / factor, y / factor);
    }
  }
  return out;
}

Rle rle_encode(const Mask& mask) {
  Rle rle{mask.size(), {}};
  std::uint8_t current = 0;
  long long run = 0;
  for (auto bit : mask.bits()) {
    if (bit != current) {
      rle.counts.push_back(run);
      current = bit;
      run = 0;
    }
    ++run;
  }
  rle.counts.push_back(run);
  return rle;
}

Mask rle_decode(const Rle& rle) {
  if (rle.size.height < 0 || rle.size.width < 0) {
    throw ValidationError("segmentation", "negative RLE size");
  }
  long long total = 0;
  for (auto c : rle.counts) {
    if (c < 0) throw ValidationError("segmentation", "negative RLE count");
    total += c;
  }
  if (total != rle.size.pixels()) {
    throw ValidationError("segmentation",
                          "RLE counts sum to " + std::to_string(total) +
                              ", expected " + std::to_string(rle.size.pixels()));
  }
  Mask mask(rle.size);
  long long pos = 0;
  bool value = false;
  for (auto c : rle.counts) {
    for (long long i = 0; i < c; ++i, ++pos) {
      if (value) {
        mask.set(static_cast<int>(pos % rle.size.width),
                 static_cast<int>(pos / rle.size.width));
      }
    }
    value = !value;
  }
  return mask;
}

}  // namespace forge
