#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace partforge {

using Rgba = std::array<std::uint8_t, 4>;

// Row-major RGBA8 image, origin at the top-left pixel.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgba;

  Image() = default;
  Image(int w, int h, Rgba fill = {0, 0, 0, 0});

  Rgba at(int x, int y) const;
  void set(int x, int y, Rgba c);
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  friend bool operator==(const Image&, const Image&) = default;
};

// PNG encoding is deterministic: fixed compression settings and no time chunks.
std::vector<std::uint8_t> encode_png(const Image& image);
std::vector<std::uint8_t> encode_png_gray16(int width, int height, std::span<const std::uint16_t> values);
Image decode_png(std::span<const std::uint8_t> bytes);

void write_png(const std::filesystem::path& path, const Image& image);
Image read_png(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
// Writes only when the content differs from what is on disk. Returns true if written.
bool write_file_if_changed(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
bool write_file_if_changed(const std::filesystem::path& path, const std::string& text);

}  // namespace partforge
