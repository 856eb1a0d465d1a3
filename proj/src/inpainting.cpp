#include "forge/inpainting.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>

#include <nlohmann/json.hpp>

#include "forge/codec.hpp"
#include "forge/error.hpp"
#include "forge/hashing.hpp"
#include "forge/scene_synth.hpp"
#include "forge/segmentation.hpp"

namespace forge {

namespace {

constexpr const char* kModule = "inpainting";

std::string lower_trim(std::string_view s) {
  std::string out;
  for (char c : s) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  const auto b = out.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = out.find_last_not_of(" \t\r\n.");
  return out.substr(b, e - b + 1);
}

Image decode_reply_image(const nlohmann::json& reply, const char* field) {
  try {
    const auto bytes = base64_decode(reply.at(field).get<std::string>());
    return png_decode(bytes);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedResponseError(kModule, std::string("reply lacks ") + field, reply.dump());
  } catch (const ValidationError& e) {
    throw MalformedResponseError(kModule, e.what(), reply.dump().substr(0, 256));
  }
}

std::string png_b64(const Image& image) { return base64_encode(png_encode(image)); }

}  // namespace

std::string prompt_object_noun(std::string_view prompt) {
  std::string p = lower_trim(prompt);
  if (const auto pos = p.rfind(" with "); pos != std::string::npos) {
    p = p.substr(pos + 6);
  } else if (p.rfind("add ", 0) == 0) {
    p = p.substr(4);
  }
  for (std::string_view article : {"a ", "an ", "the "}) {
    if (p.rfind(article, 0) == 0) {
      p = p.substr(article.size());
      break;
    }
  }
  std::size_t cut = p.size();
  for (std::string_view prep : {" in ", " on ", " into ", " onto ", " near ", " inside ", " at ",
                                " from ", " under ", " to "}) {
    cut = std::min(cut, p.find(prep));
  }
  p = p.substr(0, cut);
  return p.empty() ? lower_trim(prompt) : p;
}

Image mock_inpaint(const Image& image, const Mask& mask, std::string_view prompt,
                   std::uint64_t seed) {
  if (mask.size() != image.size()) {
    throw ValidationError(kModule, "mask size differs from image size");
  }
  Image out = image;
  const auto box = mask.bbox();
  if (!box) return out;

  const std::string noun = prompt_object_noun(prompt);
  const SpriteStyle style = sprite_for(noun);
  const double cx = box->x + box->w / 2.0;
  const double cy = box->y + box->h / 2.0;
  const double rx = box->w / 2.0;
  const double ry = box->h / 2.0;
  const std::uint64_t texture = derive_seed(seed, "mock-inpaint:" + noun);

  for (int y = box->y; y < box->bottom(); ++y) {
    for (int x = box->x; x < box->right(); ++x) {
      if (!mask.at(x, y)) continue;
      bool in_sprite = true;
      if (style.shape == Shape::ellipse) {
        const double dx = (x + 0.5 - cx) / rx;
        const double dy = (y + 0.5 - cy) / ry;
        in_sprite = dx * dx + dy * dy <= 1.0;
      }
      if (in_sprite) {
        out.set(x, y, style.color);
        continue;
      }
      const std::uint64_t n = mix64(texture ^ (static_cast<std::uint64_t>(y) << 32) ^
                                    static_cast<std::uint64_t>(x));
      Rgb c;
      for (int ch = 0; ch < 3; ++ch) {
        const int offset = 2 * static_cast<int>((n >> (8 * ch)) % 5) - 4;
        c[ch] = static_cast<std::uint8_t>(kTableColor[ch] + offset);
      }
      out.set(x, y, c);
    }
  }
  return out;
}

Image MockInpaintBackend::base(const Image& image, const Mask& mask, const std::string& prompt,
                               std::uint64_t seed) const {
  return mock_inpaint(image, mask, prompt, seed);
}

Image MockInpaintBackend::super_resolve(const Image& image, const Image& low_res,
                                        const Mask& mask, const std::string& prompt,
                                        std::uint64_t seed) const {
  if (low_res.height() <= 0 || image.height() % low_res.height() != 0) {
    throw ValidationError(kModule, "low-resolution input does not divide the SR size");
  }
  return mock_inpaint(image, mask, prompt, seed);
}

HttpInpaintBackend::HttpInpaintBackend(std::string base_url, std::string sr_url, RetryPolicy retry)
    : base_client_(std::move(base_url), kModule, retry),
      sr_client_(std::move(sr_url), kModule, retry) {}

Image HttpInpaintBackend::base(const Image& image, const Mask& mask, const std::string& prompt,
                               std::uint64_t seed) const {
  const auto reply = base_client_.post("/v1/inpaint/base",
                                       {{"image_png_b64", png_b64(image)},
                                        {"mask_rle", rle_to_json(rle_encode(mask))},
                                        {"prompt", prompt},
                                        {"seed", seed}});
  return decode_reply_image(reply, "image_png_b64");
}

Image HttpInpaintBackend::super_resolve(const Image& image, const Image& low_res,
                                        const Mask& mask, const std::string& prompt,
                                        std::uint64_t seed) const {
  const auto reply = sr_client_.post("/v1/inpaint/sr",
                                     {{"image_png_b64", png_b64(image)},
                                      {"low_res_png_b64", png_b64(low_res)},
                                      {"mask_rle", rle_to_json(rle_encode(mask))},
                                      {"prompt", prompt},
                                      {"seed", seed}});
  return decode_reply_image(reply, "image_png_b64");
}

Image inpaint_cascade(const InpaintBackend& backend, const InpaintRequest& request,
                      const CascadeConfig& config) {
  if (!config.valid()) {
    throw ValidationError(kModule, "SR resolution must be a multiple of the base resolution");
  }
  const ImageSize sr{config.sr_resolution, config.sr_resolution};
  if (request.image.size() != sr) {
    throw ValidationError(kModule, "cascade input must be " + std::to_string(sr.height) + "x" +
                                       std::to_string(sr.width));
  }
  if (request.mask.size() != sr) throw ValidationError(kModule, "mask size differs from image size");
  if (request.prompt.empty()) throw ValidationError(kModule, "inpainting prompt is empty");

  const Image low_image = downsample_area(request.image, config.factor());
  const Mask low_mask = downsample_any(request.mask, config.factor());
  const Image low_out = backend.base(low_image, low_mask, request.prompt, request.seed);
  if (low_out.size() != low_image.size()) {
    throw MalformedResponseError(kModule, "base stage returned " + std::to_string(low_out.height()) +
                                              "x" + std::to_string(low_out.width()) + ", expected " +
                                              std::to_string(config.base_resolution),
                                 {});
  }
  Image out = backend.super_resolve(request.image, low_out, request.mask, request.prompt,
                                    request.seed);
  if (out.size() != sr) {
    throw MalformedResponseError(kModule, "SR stage returned " + std::to_string(out.height()) + "x" +
                                              std::to_string(out.width()) + ", expected " +
                                              std::to_string(config.sr_resolution),
                                 {});
  }
  return out;
}

LocalityReport verify_locality(const Image& before, const Image& after, const Mask& mask,
                               int tolerance) {
  if (before.size() != after.size() || mask.size() != before.size()) {
    throw ValidationError(kModule, "locality check needs equally sized images and mask");
  }
  LocalityReport report;
  for (int y = 0; y < before.height(); ++y) {
    for (int x = 0; x < before.width(); ++x) {
      if (mask.at(x, y)) continue;
      const Rgb a = before.at(x, y);
      const Rgb b = after.at(x, y);
      int delta = 0;
      for (int ch = 0; ch < 3; ++ch) delta = std::max(delta, std::abs(int(a[ch]) - int(b[ch])));
      if (delta > report.worst_delta) {
        report.worst_delta = delta;
        report.worst_pixel = std::make_pair(x, y);
      }
    }
  }
  report.ok = report.worst_delta <= tolerance;
  return report;
}

}  // namespace forge
