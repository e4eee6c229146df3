#include "octdn/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include "octdn/rng.hpp"

namespace octdn {

double clip01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

Image::Image(int h, int w, double fill) : height(h), width(w) {
  if (h <= 0 || w <= 0) throw std::invalid_argument("image extents must be positive");
  pixels.assign(static_cast<size_t>(h) * w, fill);
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

Image load_png(const std::string& path, std::FILE* fp) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng init failed");
  }
  std::vector<png_bytep> row_ptrs;
  std::vector<png_byte> raw;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("failed to decode PNG: " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  int color = png_get_color_type(png, info);

  if (depth == 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("unsupported bit depth 16 (8-bit expected): " + path);
  }
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);
  color = png_get_color_type(png, info);
  const int channels = png_get_channels(png, info);

  const size_t rowbytes = png_get_rowbytes(png, info);
  raw.resize(rowbytes * h);
  row_ptrs.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) row_ptrs[y] = raw.data() + y * rowbytes;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(static_cast<int>(h), static_cast<int>(w));
  // Gray or gray+alpha use the gray channel; RGB(A) averages the color channels.
  const int color_channels = (channels >= 3) ? 3 : 1;
  for (png_uint_32 y = 0; y < h; ++y) {
    const png_byte* row = raw.data() + y * rowbytes;
    for (png_uint_32 x = 0; x < w; ++x) {
      const png_byte* px = row + x * channels;
      double acc = 0.0;
      for (int c = 0; c < color_channels; ++c) acc += px[c];
      img.at(static_cast<int>(y), static_cast<int>(x)) =
          acc / (255.0 * color_channels);
    }
  }
  return img;
}

void skip_pgm_whitespace(std::istream& in) {
  for (;;) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

Image load_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || m1 != '5') throw IoError("not a binary PGM (P5): " + path);
  long w = 0, h = 0, maxval = 0;
  skip_pgm_whitespace(in);
  in >> w;
  skip_pgm_whitespace(in);
  in >> h;
  skip_pgm_whitespace(in);
  in >> maxval;
  if (!in || w <= 0 || h <= 0) throw IoError("malformed PGM header: " + path);
  if (maxval != 255)
    throw IoError("unsupported bit depth (maxval " + std::to_string(maxval) +
                  ", 255 expected): " + path);
  in.get();  // single whitespace after maxval
  std::vector<unsigned char> raw(static_cast<size_t>(w) * h);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size()))
    throw IoError("truncated PGM payload: " + path);
  Image img(static_cast<int>(h), static_cast<int>(w));
  for (size_t i = 0; i < raw.size(); ++i) img.pixels[i] = raw[i] / 255.0;
  return img;
}

std::vector<unsigned char> quantize(const Image& img) {
  std::vector<unsigned char> out(img.size());
  for (size_t i = 0; i < img.size(); ++i) {
    const double v = clip01(img.pixels[i]);
    out[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  return out;
}

}  // namespace

Image load_image(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open file: " + path);
  unsigned char magic[8] = {0};
  const size_t got = std::fread(magic, 1, sizeof magic, fp.get());
  if (got < 2) throw IoError("file too short: " + path);
  std::rewind(fp.get());
  if (png_sig_cmp(magic, 0, got) == 0) return load_png(path, fp.get());
  if (magic[0] == 'P' && magic[1] == '5') {
    fp.reset();
    return load_pgm(path);
  }
  throw IoError("unsupported image format (PNG or P5 PGM expected): " + path);
}

void save_png(const Image& img, const std::string& path) {
  if (img.height <= 0 || img.width <= 0)
    throw std::invalid_argument("save_png: empty image");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open file for writing: " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed to encode PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<unsigned char> bytes = quantize(img);
  for (int y = 0; y < img.height; ++y)
    png_write_row(png, bytes.data() + static_cast<size_t>(y) * img.width);
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
}

void save_pgm(const Image& img, const std::string& path) {
  if (img.height <= 0 || img.width <= 0)
    throw std::invalid_argument("save_pgm: empty image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open file for writing: " + path);
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  std::vector<unsigned char> bytes = quantize(img);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed to write PGM: " + path);
}

void save_image(const Image& img, const std::string& path) {
  auto ends_with = [&](const char* suf) {
    const size_t n = std::strlen(suf);
    return path.size() >= n && path.compare(path.size() - n, n, suf) == 0;
  };
  if (ends_with(".png")) {
    save_png(img, path);
  } else if (ends_with(".pgm")) {
    save_pgm(img, path);
  } else {
    throw std::invalid_argument("save_image: unsupported extension (png/pgm): " + path);
  }
}

Image corrupt(const Image& img, double sigma, uint64_t seed) {
  if (sigma < 0.0) throw std::invalid_argument("corrupt: sigma must be non-negative");
  if (sigma == 0.0) return img;
  Image out = img;
  Rng rng(seed);
  for (double& v : out.pixels) v = clip01(v + rng.next_gaussian(0.0, sigma));
  return out;
}

Image resize_to(const Image& img, int size) {
  if (size <= 0) throw std::invalid_argument("resize_to: size must be positive");
  if (img.height == size && img.width == size) return img;
  Image out(size, size);
  const double sy = static_cast<double>(img.height) / size;
  const double sx = static_cast<double>(img.width) / size;
  for (int y = 0; y < size; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(img.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < size; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(img.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - x0;
      const double top = img.at(y0, x0) * (1.0 - wx) + img.at(y0, x1) * wx;
      const double bot = img.at(y1, x0) * (1.0 - wx) + img.at(y1, x1) * wx;
      out.at(y, x) = clip01(top * (1.0 - wy) + bot * wy);
    }
  }
  return out;
}

}  // namespace octdn
