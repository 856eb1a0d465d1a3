#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "forge/image.hpp"

namespace forge {

// Binary bitmap at image resolution, one byte per pixel (0 or 1).
class Mask {
 public:
  Mask() = default;
  explicit Mask(ImageSize size, bool value = false);

  ImageSize size() const { return size_; }
  int height() const { return size_.height; }
  int width() const { return size_.width; }

  bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool v = true) { bits_[index(x, y)] = v ? 1 : 0; }

  void fill_rect(const Rect& r, bool v = true);

  long long count() const;
  bool any() const { return count() > 0; }
  // Tight bounding box of the set bits; nullopt for an all-zero mask.
  std::optional<Rect> bbox() const;

  bool subset_of(const Mask& other) const;
  bool disjoint_from(const Mask& other) const;

  std::span<const std::uint8_t> bits() const { return bits_; }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * size_.width + x;
  }

  ImageSize size_;
  std::vector<std::uint8_t> bits_;
};

Mask mask_union(std::span<const Mask> masks, ImageSize size);
Mask mask_from_rect(ImageSize size, const Rect& r);

// Downsample by an integer factor; an output bit is set when any input bit
// in its block is set.
Mask downsample_any(const Mask& mask, int factor);

// Row-major run-length code. counts alternate zero-run, one-run, ...;
// the first entry is the (possibly empty) leading zero-run.
struct Rle {
  ImageSize size;
  std::vector<long long> counts;
  friend bool operator==(const Rle&, const Rle&) = default;
};

Rle rle_encode(const Mask& mask);
// Throws ValidationError when counts do not sum to H*W or are negative.
Mask rle_decode(const Rle& rle);

}  // namespace forge
