#include "hevs/image.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "hevs/error.hpp"

namespace hevs {
namespace {

constexpr std::uint16_t kCodecVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 2 + 4 + 4;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::string header(const char magic[4], int h, int w) {
  std::string out(magic, 4);
  put_u16(out, kCodecVersion);
  put_u32(out, static_cast<std::uint32_t>(h));
  put_u32(out, static_cast<std::uint32_t>(w));
  return out;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorCode::Io, "write failed for " + path.string());
}

struct Header {
  int height;
  int width;
  const unsigned char* payload;
  std::size_t payload_bytes;
};

Header parse_header(const std::string& bytes, const char magic[4], const std::filesystem::path& path) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  require(bytes.size() >= kHeaderBytes, ErrorCode::Format, path.string() + ": header truncated");
  require(std::memcmp(p, magic, 4) == 0, ErrorCode::Format,
          path.string() + ": bad magic, expected " + std::string(magic, 4));
  const std::uint16_t version = get_u16(p + 4);
  require(version == kCodecVersion, ErrorCode::Format,
          path.string() + ": unsupported version " + std::to_string(version));
  const std::uint32_t h = get_u32(p + 6);
  const std::uint32_t w = get_u32(p + 10);
  require(h > 0 && w > 0 && h % 4 == 0 && w % 4 == 0 && h <= (1u << 20) && w <= (1u << 20),
          ErrorCode::Format,
          path.string() + ": dimensions " + std::to_string(h) + "x" + std::to_string(w) +
              " are not positive multiples of 4");
  return {static_cast<int>(h), static_cast<int>(w), p + kHeaderBytes, bytes.size() - kHeaderBytes};
}

void check_dims(int h, int w, const char* what) {
  require(h > 0 && w > 0 && h % 4 == 0 && w % 4 == 0, ErrorCode::Precondition,
          std::string(what) + " dimensions " + std::to_string(h) + "x" + std::to_string(w) +
              " are not positive multiples of 4");
}

}  // namespace

RawImage::RawImage(int h, int w, PatternSpec p)
    : height(h), width(w), values(static_cast<std::size_t>(h) * w, 0), pattern(p) {}

void RawImage::validate() const {
  check_dims(height, width, "raw image");
  require(values.size() == static_cast<std::size_t>(height) * width, ErrorCode::Precondition,
          "raw image buffer size does not match its dimensions");
  for (std::size_t i = 0; i < values.size(); ++i)
    require(values[i] <= kRawMax, ErrorCode::Range,
            "raw sample " + std::to_string(values[i]) + " at index " + std::to_string(i) +
                " exceeds 1023");
}

RgbImage::RgbImage(int h, int w, float fill)
    : height(h), width(w), values(static_cast<std::size_t>(h) * w * 3, fill) {}

DefectMap::DefectMap(int h, int w)
    : height(h), width(w), mask(static_cast<std::size_t>(h) * w, 0) {}

std::size_t DefectMap::count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

RgbImage extend_to_rgb(const RawImage& raw) {
  RgbImage out(raw.height, raw.width);
  for (int r = 0; r < raw.height; ++r)
    for (int c = 0; c < raw.width; ++c) {
      const int ch = channel_of(raw.pattern.at(r, c));
      if (ch >= 0) out.at(r, c, ch) = static_cast<float>(raw.at(r, c)) / kRawMax;
    }
  return out;
}

RawImage mosaic(const RgbImage& rgb, const PatternSpec& pattern) {
  check_dims(rgb.height, rgb.width, "mosaic input");
  RawImage out(rgb.height, rgb.width, pattern);
  for (int r = 0; r < rgb.height; ++r)
    for (int c = 0; c < rgb.width; ++c) {
      const int ch = channel_of(pattern.at(r, c));
      if (ch < 0) continue;
      const float v = std::clamp(rgb.at(r, c, ch), 0.0f, 1.0f);
      out.at(r, c) = static_cast<std::uint16_t>(std::lround(v * kRawMax));
    }
  return out;
}

float quantize8(float v) noexcept {
  if (!(v > 0.0f)) return 0.0f;  // also maps NaN to 0
  if (v >= 1.0f) return 1.0f;
  return std::nearbyint(v * 255.0f) / 255.0f;
}

RgbImage clamp01(RgbImage img) {
  for (float& v : img.values) v = std::isnan(v) ? 0.0f : std::clamp(v, 0.0f, 1.0f);
  return img;
}

RawImage read_raw_bin(const std::filesystem::path& path, const PatternSpec& pattern) {
  const std::string bytes = slurp(path);
  const Header hdr = parse_header(bytes, "HEVS", path);
  const std::size_t n = static_cast<std::size_t>(hdr.height) * hdr.width;
  require(hdr.payload_bytes == n * 2, ErrorCode::Truncated,
          path.string() + ": payload holds " + std::to_string(hdr.payload_bytes) +
              " bytes, expected " + std::to_string(n * 2));
  RawImage img(hdr.height, hdr.width, pattern);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint16_t v = get_u16(hdr.payload + 2 * i);
    require(v <= kRawMax, ErrorCode::Range,
            path.string() + ": sample " + std::to_string(v) + " at index " + std::to_string(i) +
                " exceeds 1023");
    img.values[i] = v;
  }
  return img;
}

void write_raw_bin(const RawImage& img, const std::filesystem::path& path) {
  img.validate();
  std::string bytes = header("HEVS", img.height, img.width);
  bytes.reserve(kHeaderBytes + img.values.size() * 2);
  for (std::uint16_t v : img.values) put_u16(bytes, v);
  dump(path, bytes);
}

DefectMap read_defect_map(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  const Header hdr = parse_header(bytes, "HDEF", path);
  const std::size_t n = static_cast<std::size_t>(hdr.height) * hdr.width;
  require(hdr.payload_bytes == n, ErrorCode::Truncated,
          path.string() + ": payload holds " + std::to_string(hdr.payload_bytes) +
              " bytes, expected " + std::to_string(n));
  DefectMap map(hdr.height, hdr.width);
  for (std::size_t i = 0; i < n; ++i) {
    require(hdr.payload[i] <= 1, ErrorCode::Range, path.string() + ": defect byte is not 0/1");
    map.mask[i] = hdr.payload[i];
  }
  return map;
}

void write_defect_map(const DefectMap& map, const std::filesystem::path& path) {
  check_dims(map.height, map.width, "defect map");
  std::string bytes = header("HDEF", map.height, map.width);
  bytes.append(reinterpret_cast<const char*>(map.mask.data()), map.mask.size());
  dump(path, bytes);
}

RgbImage read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  require(png_image_begin_read_from_file(&image, path.c_str()) != 0, ErrorCode::Io,
          path.string() + ": " + image.message);
  image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr) == 0) {
    const std::string msg = image.message;
    png_image_free(&image);
    fail(ErrorCode::Io, path.string() + ": " + msg);
  }
  RgbImage out(static_cast<int>(image.height), static_cast<int>(image.width));
  for (std::size_t i = 0; i < buffer.size(); ++i) out.values[i] = buffer[i] / 255.0f;
  return out;
}

void write_png(const RgbImage& img, const std::filesystem::path& path) {
  std::vector<png_byte> buffer(img.values.size());
  for (std::size_t i = 0; i < buffer.size(); ++i)
    buffer[i] = static_cast<png_byte>(std::lround(quantize8(img.values[i]) * 255.0f));
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  require(png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0, nullptr) != 0,
          ErrorCode::Io, path.string() + ": " + image.message);
}

void write_gray_png(const std::vector<float>& gray, int height, int width,
                    const std::filesystem::path& path) {
  std::vector<png_byte> buffer(gray.size());
  for (std::size_t i = 0; i < buffer.size(); ++i)
    buffer[i] = static_cast<png_byte>(std::lround(quantize8(gray[i]) * 255.0f));
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = PNG_FORMAT_GRAY;
  require(png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0, nullptr) != 0,
          ErrorCode::Io, path.string() + ": " + image.message);
}

}  // namespace hevs
