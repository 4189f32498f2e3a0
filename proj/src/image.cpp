#include "partforge/image.hpp"

#include <png.h>

#include <cstring>
#include <fstream>
#include <iterator>

#include "partforge/errors.hpp"

namespace partforge {

Image::Image(int w, int h, Rgba fill) : width(w), height(h), rgba(static_cast<std::size_t>(w) * h * 4) {
  for (std::size_t i = 0; i < rgba.size(); i += 4) std::memcpy(&rgba[i], fill.data(), 4);
}

Rgba Image::at(int x, int y) const {
  const auto* p = &rgba[(static_cast<std::size_t>(y) * width + x) * 4];
  return {p[0], p[1], p[2], p[3]};
}

void Image::set(int x, int y, Rgba c) {
  std::memcpy(&rgba[(static_cast<std::size_t>(y) * width + x) * 4], c.data(), 4);
}

namespace {

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  PngWriter() {
    png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoFailure("png_create_write_struct failed");
    info = png_create_info_struct(png);
    if (!info) {
      png_destroy_write_struct(&png, nullptr);
      throw IoFailure("png_create_info_struct failed");
    }
  }
  ~PngWriter() { png_destroy_write_struct(&png, &info); }
  PngWriter(const PngWriter&) = delete;
  PngWriter& operator=(const PngWriter&) = delete;
};

void append_bytes(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}

void no_flush(png_structp) {}

std::vector<std::uint8_t> encode_rows(int width, int height, int bit_depth, int color_type,
                                      std::vector<png_bytep>& rows) {
  std::vector<std::uint8_t> out;
  PngWriter w;
  if (setjmp(png_jmpbuf(w.png))) throw IoFailure("png encoding failed");
  png_set_write_fn(w.png, &out, append_bytes, no_flush);
  png_set_compression_level(w.png, 6);
  png_set_IHDR(w.png, w.info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  png_write_image(w.png, rows.data());
  png_write_end(w.png, nullptr);
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image& image) {
  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
  auto* base = const_cast<std::uint8_t*>(image.rgba.data());
  for (int y = 0; y < image.height; ++y) rows[y] = base + static_cast<std::size_t>(y) * image.width * 4;
  return encode_rows(image.width, image.height, 8, PNG_COLOR_TYPE_RGBA, rows);
}

std::vector<std::uint8_t> encode_png_gray16(int width, int height, std::span<const std::uint16_t> values) {
  if (values.size() != static_cast<std::size_t>(width) * height) throw InvalidArgument("gray16 size mismatch");
  // PNG stores 16-bit samples big-endian.
  std::vector<std::uint8_t> be(values.size() * 2);
  for (std::size_t i = 0; i < values.size(); ++i) {
    be[2 * i] = static_cast<std::uint8_t>(values[i] >> 8);
    be[2 * i + 1] = static_cast<std::uint8_t>(values[i] & 0xff);
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) rows[y] = be.data() + static_cast<std::size_t>(y) * width * 2;
  return encode_rows(width, height, 16, PNG_COLOR_TYPE_GRAY, rows);
}

namespace {

struct ReadCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

void read_bytes(png_structp png, png_bytep data, png_size_t len) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + len > cur->bytes.size()) png_error(png, "truncated png");
  std::memcpy(data, cur->bytes.data() + cur->pos, len);
  cur->pos += len;
}

}  // namespace

Image decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw IoFailure("not a png");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoFailure("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  ReadCursor cur{bytes, 0};
  Image image;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoFailure("png decoding failed");
  }
  png_set_read_fn(png, &cur, read_bytes);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_gray_to_rgb(png);
  png_set_add_alpha(png, 0xff, PNG_FILLER_AFTER);
  png_read_update_info(png, info);
  image = Image(static_cast<int>(png_get_image_width(png, info)), static_cast<int>(png_get_image_height(png, info)));
  rows.resize(static_cast<std::size_t>(image.height));
  for (int y = 0; y < image.height; ++y) rows[y] = image.rgba.data() + static_cast<std::size_t>(y) * image.width * 4;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool write_file_if_changed(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::error_code ec;
  if (std::filesystem::exists(path, ec) && std::filesystem::file_size(path, ec) == bytes.size()) {
    const auto existing = read_file_bytes(path);
    if (std::equal(existing.begin(), existing.end(), bytes.begin(), bytes.end())) return false;
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoFailure("short write to " + path.string());
  return true;
}

bool write_file_if_changed(const std::filesystem::path& path, const std::string& text) {
  return write_file_if_changed(
      path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void write_png(const std::filesystem::path& path, const Image& image) {
  write_file_if_changed(path, encode_png(image));
}

Image read_png(const std::filesystem::path& path) { return decode_png(read_file_bytes(path)); }

}  // namespace partforge
