#include "casr/image_io.hpp"

#include <png.h>

#include <array>
#include <cctype>
#include <fstream>
#include <iterator>
#include <string>

#include "casr/error.hpp"

namespace casr {
namespace fs = std::filesystem;

namespace {

std::vector<unsigned char> read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool is_png(const std::vector<unsigned char>& bytes) {
  static constexpr std::array<unsigned char, 8> sig{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  return bytes.size() >= sig.size() && std::equal(sig.begin(), sig.end(), bytes.begin());
}

// Skips whitespace and '#' comments, then reads one unsigned decimal field.
long read_pgm_field(const std::vector<unsigned char>& bytes, std::size_t& pos, const fs::path& path) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw IoError("malformed PGM header in " + path.string());
  long value = 0;
  while (pos < bytes.size() && std::isdigit(bytes[pos])) {
    value = value * 10 + (bytes[pos] - '0');
    if (value > (1L << 30)) throw IoError("PGM header field too large in " + path.string());
    ++pos;
  }
  return value;
}

GrayImage decode_pgm(const std::vector<unsigned char>& bytes, const fs::path& path) {
  if (bytes.size() < 2 || bytes[0] != 'P') throw IoError("unsupported format: " + path.string());
  if (bytes[1] != '5') throw IoError("unsupported format: only binary P5 PGM is accepted (" + path.string() + ")");
  std::size_t pos = 2;
  const long width = read_pgm_field(bytes, pos, path);
  const long height = read_pgm_field(bytes, pos, path);
  const long maxval = read_pgm_field(bytes, pos, path);
  if (width <= 0 || height <= 0) throw IoError("PGM has non-positive dimensions: " + path.string());
  if (maxval != 255) throw IoError("unsupported bit depth: PGM maxval must be 255 (" + path.string() + ")");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw IoError("malformed PGM header in " + path.string());
  ++pos;
  const auto expected = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() - pos != expected) throw IoError("PGM header/payload length mismatch in " + path.string());
  GrayImage img(height, width);
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end(), img.data());
  return img;
}

MultiChannelImage decode_png(const std::vector<unsigned char>& bytes, const fs::path& path) {
  // IHDR immediately follows the signature: bit depth at byte 24, color type at 25.
  if (bytes.size() < 26) throw IoError("truncated PNG: " + path.string());
  const int bit_depth = bytes[24];
  const int color_type = bytes[25];
  if (bit_depth != 8) throw IoError("unsupported bit depth " + std::to_string(bit_depth) + " in " + path.string());
  int channels = 0;
  if (color_type == PNG_COLOR_TYPE_GRAY) {
    channels = 1;
  } else if (color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    channels = 2;
  } else {
    throw IoError("unsupported PNG color type (grayscale required): " + path.string());
  }

  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw IoError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  image.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_GA;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    throw IoError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  const Eigen::Index w = image.width;
  const Eigen::Index h = image.height;
  MultiChannelImage out;
  for (int c = 0; c < channels; ++c) {
    GrayImage plane(h, w);
    for (Eigen::Index i = 0; i < w * h; ++i) plane.data()[i] = buffer[static_cast<std::size_t>(i * channels + c)];
    out.planes.push_back(std::move(plane));
  }
  return out;
}

void write_png(const fs::path& path, png_uint_32 width, png_uint_32 height, png_uint_32 format,
               const std::vector<png_byte>& buffer) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = width;
  image.height = height;
  image.format = format;
  if (path.has_parent_path() && !fs::exists(path.parent_path())) {
    throw IoError("output directory does not exist: " + path.parent_path().string());
  }
  if (!png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + image.message);
  }
}

void write_pgm(const GrayImage& img, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "P5\n" << img.cols() << ' ' << img.rows() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data()), img.size());
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

MultiChannelImage load_multichannel(const fs::path& path) {
  const auto bytes = read_all(path);
  if (is_png(bytes)) return decode_png(bytes, path);
  MultiChannelImage out;
  out.planes.push_back(decode_pgm(bytes, path));
  return out;
}

GrayImage load_image(const fs::path& path) {
  auto img = load_multichannel(path);
  if (img.channels() != 1) throw IoError("expected a single-channel grayscale image: " + path.string());
  return std::move(img.planes.front());
}

void save_image(const GrayImage& img, const fs::path& path) {
  require(img.size() > 0, "save_image: empty image");
  if (path.extension() == ".pgm") {
    write_pgm(img, path);
    return;
  }
  std::vector<png_byte> buffer(img.data(), img.data() + img.size());
  write_png(path, static_cast<png_uint_32>(img.cols()), static_cast<png_uint_32>(img.rows()), PNG_FORMAT_GRAY,
            buffer);
}

void save_image(const BinaryMask& mask, const fs::path& path) { save_image(mask_to_gray(mask), path); }

void save_image(const RgbImage& img, const fs::path& path) {
  require(img.r.size() > 0 && same_size(img.r, img.g) && same_size(img.r, img.b), "save_image: bad RGB planes");
  const auto n = static_cast<std::size_t>(img.r.size());
  std::vector<png_byte> buffer(3 * n);
  for (std::size_t i = 0; i < n; ++i) {
    buffer[3 * i] = img.r.data()[i];
    buffer[3 * i + 1] = img.g.data()[i];
    buffer[3 * i + 2] = img.b.data()[i];
  }
  write_png(path, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), PNG_FORMAT_RGB,
            buffer);
}

void save_image(const MultiChannelImage& img, const fs::path& path) {
  const int c = img.channels();
  require(c == 1 || c == 2, "save_image: multichannel PNG supports 1 or 2 planes");
  if (c == 1) {
    save_image(img.planes.front(), path);
    return;
  }
  require(same_size(img.planes[0], img.planes[1]), "save_image: plane size mismatch");
  const auto n = static_cast<std::size_t>(img.planes[0].size());
  std::vector<png_byte> buffer(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    buffer[2 * i] = img.planes[0].data()[i];
    buffer[2 * i + 1] = img.planes[1].data()[i];
  }
  write_png(path, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), PNG_FORMAT_GA,
            buffer);
}

}  // namespace casr
