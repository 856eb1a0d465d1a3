#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "forge/http.hpp"
#include "forge/image.hpp"
#include "forge/mask.hpp"

namespace forge {

struct CascadeConfig {
  int base_resolution = 64;
  int sr_resolution = 256;

  bool valid() const {
    return base_resolution > 0 && sr_resolution >= base_resolution &&
           sr_resolution % base_resolution == 0;
  }
  int factor() const { return sr_resolution / base_resolution; }
};

struct InpaintRequest {
  Image image;
  Mask mask;
  std::string prompt;
  std::uint64_t seed = 0;
};

// Two-stage text-guided inpainting: a low-resolution base edit, then a
// super-resolution pass conditioned on the original and the base output.
class InpaintBackend {
 public:
  virtual ~InpaintBackend() = default;
  virtual Image base(const Image& image, const Mask& mask, const std::string& prompt,
                     std::uint64_t seed) const = 0;
  virtual Image super_resolve(const Image& image, const Image& low_res, const Mask& mask,
                              const std::string& prompt, std::uint64_t seed) const = 0;
};

// Both stages run mock_inpaint at their own resolution.
class MockInpaintBackend : public InpaintBackend {
 public:
  Image base(const Image& image, const Mask& mask, const std::string& prompt,
             std::uint64_t seed) const override;
  Image super_resolve(const Image& image, const Image& low_res, const Mask& mask,
                      const std::string& prompt, std::uint64_t seed) const override;
};

// Client for POST /v1/inpaint/base and /v1/inpaint/sr. The two stages may
// live on different servers.
class HttpInpaintBackend : public InpaintBackend {
 public:
  HttpInpaintBackend(std::string base_url, std::string sr_url, RetryPolicy retry = {});

  Image base(const Image& image, const Mask& mask, const std::string& prompt,
             std::uint64_t seed) const override;
  Image super_resolve(const Image& image, const Image& low_res, const Mask& mask,
                      const std::string& prompt, std::uint64_t seed) const override;

 private:
  JsonHttpClient base_client_;
  JsonHttpClient sr_client_;
};

// Exactly two backend calls: base on the area-averaged image and any-hit
// mask at base resolution, then SR on the original with the base output.
// Replies of the wrong size raise MalformedResponseError.
Image inpaint_cascade(const InpaintBackend& backend, const InpaintRequest& request,
                      const CascadeConfig& config = {});

// Object noun an inpainting prompt asks for: "add a box of crackers in the
// drawer" -> "box of crackers", "replace the A with a B" -> "B".
std::string prompt_object_noun(std::string_view prompt);

// Stamps the scene sprite for the prompt's noun into the mask's bounding box,
// clipped to the mask. Mask pixels outside the sprite shape get a seeded
// table-like texture; pixels outside the mask are copied untouched.
Image mock_inpaint(const Image& image, const Mask& mask, std::string_view prompt,
                   std::uint64_t seed);

inline constexpr int kRemoteLocalityTolerance = 2;

struct LocalityReport {
  bool ok = true;
  // Worst out-of-mask pixel (largest channel difference), if any differs.
  std::optional<std::pair<int, int>> worst_pixel;
  int worst_delta = 0;
};

// ok iff every mask=0 pixel differs by at most tolerance in every channel.
LocalityReport verify_locality(const Image& before, const Image& after, const Mask& mask,
                               int tolerance);

}  // namespace forge
