#include "sdit/image_io.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>

namespace sdit {

namespace {

using FilePtr = std::unique_ptr<std::FILE, int (*)(std::FILE*)>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode), &std::fclose);
  if (!f) throw DataError("cannot open " + path.string());
  return f;
}

Raster read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw DataError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  Raster r(static_cast<int>(image.width), static_cast<int>(image.height));
  if (!png_image_finish_read(&image, nullptr, r.rgb.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw DataError("cannot decode PNG " + path.string() + ": " + msg);
  }
  return r;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

Raster read_jpeg(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  Raster r;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw DataError("cannot decode JPEG " + path.string() + ": " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  r = Raster(static_cast<int>(cinfo.output_width), static_cast<int>(cinfo.output_height));
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = r.pixel(0, static_cast<int>(cinfo.output_scanline));
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return r;
}

// 5x7 glyphs, one byte per row, low five bits used (bit 4 = leftmost).
struct Glyph {
  char ch;
  std::array<std::uint8_t, 7> rows;
};

constexpr Glyph kFont[] = {
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}}, {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}}, {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}}, {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}}, {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}}, {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}}, {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}}, {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}}, {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}}, {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}}, {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}}, {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}}, {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}}, {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}}, {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}}, {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}}, {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}}, {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}}, {',', {0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08}},
    {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}}, {'=', {0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00}},
    {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}}, {'/', {0x00, 0x01, 0x02, 0x04, 0x08, 0x10, 0x00}},
    {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}}, {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
    {'#', {0x0A, 0x0A, 0x1F, 0x0A, 0x1F, 0x0A, 0x0A}},
};

const Glyph* find_glyph(char c) {
  const char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (const Glyph& g : kFont) {
    if (g.ch == u) return &g;
  }
  return nullptr;
}

}  // namespace

Raster read_raster(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), sizeof sig);
  if (in.gcount() >= 8 && png_sig_cmp(sig, 0, 8) == 0) return read_png(path);
  if (in.gcount() >= 3 && sig[0] == 0xFF && sig[1] == 0xD8 && sig[2] == 0xFF) return read_jpeg(path);
  throw DataError("cannot decode " + path.string() + ": not a PNG or JPEG file");
}

void write_png(const std::filesystem::path& path, const Raster& r) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(r.width);
  image.height = static_cast<png_uint_32>(r.height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, r.rgb.data(), 0, nullptr)) {
    throw DataError("cannot write PNG " + path.string() + ": " + image.message);
  }
}

Tensor<float> to_tensor(const Raster& r) {
  Tensor<float> t(Shape{1, r.height, r.width, 3});
  for (std::size_t i = 0; i < r.rgb.size(); ++i) {
    t.flat()(static_cast<Index>(i)) = static_cast<float>(r.rgb[i]) / 127.5f - 1.0f;
  }
  return t;
}

Raster to_raster(const Tensor<float>& image, Index sample) {
  const Shape& s = image.shape;
  if (s.c != 3) throw DomainError("to_raster: expected 3 channels, got " + to_string(s));
  Raster r(static_cast<int>(s.w), static_cast<int>(s.h));
  auto rows = image.sample_rows(sample);
  for (Index p = 0; p < rows.rows(); ++p) {
    for (Index c = 0; c < 3; ++c) {
      const float v = std::clamp(rows(p, c), -1.0f, 1.0f);
      r.rgb[static_cast<std::size_t>(p * 3 + c)] =
          static_cast<std::uint8_t>(std::lround((v + 1.0f) * 127.5f));
    }
  }
  return r;
}

Tensor<float> read_image(const std::filesystem::path& path) { return to_tensor(read_raster(path)); }

void write_image(const std::filesystem::path& path, const Tensor<float>& image, Index sample) {
  write_png(path, to_raster(image, sample));
}

Tensor<float> resize_bilinear(const Tensor<float>& images, Index out_h, Index out_w) {
  const Shape& s = images.shape;
  if (out_h < 1 || out_w < 1) throw DomainError("resize_bilinear: empty target size");
  if (s.h == out_h && s.w == out_w) return images;
  Tensor<float> out(Shape{s.n, out_h, out_w, s.c});
  const double sy = static_cast<double>(s.h) / out_h;
  const double sx = static_cast<double>(s.w) / out_w;
  for (Index n = 0; n < s.n; ++n) {
    for (Index y = 0; y < out_h; ++y) {
      const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(s.h - 1));
      const Index y0 = static_cast<Index>(fy);
      const Index y1 = std::min(y0 + 1, s.h - 1);
      const float wy = static_cast<float>(fy - y0);
      for (Index x = 0; x < out_w; ++x) {
        const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(s.w - 1));
        const Index x0 = static_cast<Index>(fx);
        const Index x1 = std::min(x0 + 1, s.w - 1);
        const float wx = static_cast<float>(fx - x0);
        for (Index c = 0; c < s.c; ++c) {
          const float top = images.at(n, y0, x0, c) * (1 - wx) + images.at(n, y0, x1, c) * wx;
          const float bot = images.at(n, y1, x0, c) * (1 - wx) + images.at(n, y1, x1, c) * wx;
          out.at(n, y, x, c) = top * (1 - wy) + bot * wy;
        }
      }
    }
  }
  return out;
}

Tensor<float> center_crop(const Tensor<float>& images, Index h, Index w) {
  const Shape& s = images.shape;
  if (h > s.h || w > s.w || h < 1 || w < 1) {
    throw DomainError("center_crop: window " + std::to_string(h) + "x" + std::to_string(w) +
                      " does not fit " + to_string(s));
  }
  const Index top = (s.h - h) / 2;
  const Index left = (s.w - w) / 2;
  Tensor<float> out(Shape{s.n, h, w, s.c});
  for (Index n = 0; n < s.n; ++n) {
    for (Index y = 0; y < h; ++y) {
      for (Index x = 0; x < w; ++x) {
        for (Index c = 0; c < s.c; ++c) out.at(n, y, x, c) = images.at(n, top + y, left + x, c);
      }
    }
  }
  return out;
}

int text_width(const std::string& text, int scale) {
  return text.empty() ? 0 : static_cast<int>(text.size()) * 6 * scale - scale;
}

void draw_text(Raster& r, int x, int y, const std::string& text, int scale, std::uint8_t value) {
  for (char ch : text) {
    if (const Glyph* g = find_glyph(ch)) {
      for (int row = 0; row < 7; ++row) {
        for (int col = 0; col < 5; ++col) {
          if (!(g->rows[row] & (0x10 >> col))) continue;
          for (int dy = 0; dy < scale; ++dy) {
            for (int dx = 0; dx < scale; ++dx) {
              const int px = x + col * scale + dx, py = y + row * scale + dy;
              if (px < 0 || py < 0 || px >= r.width || py >= r.height) continue;
              std::uint8_t* p = r.pixel(px, py);
              p[0] = p[1] = p[2] = value;
            }
          }
        }
      }
    }
    x += 6 * scale;
  }
}

Raster compose_grid(const std::vector<std::vector<Tensor<float>>>& cells,
                    const std::vector<std::string>& column_headers,
                    const std::vector<std::string>& row_labels, int padding) {
  if (cells.empty() || cells.front().empty()) throw DomainError("compose_grid: no cells");
  const Shape tile = cells.front().front().shape;
  const int tw = static_cast<int>(tile.w), th = static_cast<int>(tile.h);
  std::size_t cols = 0;
  for (const auto& row : cells) cols = std::max(cols, row.size());

  int label_w = 0;
  for (const auto& l : row_labels) label_w = std::max(label_w, text_width(l) + 2 * padding);
  const int header_h = column_headers.empty() ? 0 : 7 + 2 * padding;
  int cell_w = tw;
  for (const auto& h : column_headers) cell_w = std::max(cell_w, text_width(h));

  const int width = label_w + static_cast<int>(cols) * (cell_w + padding) + padding;
  const int height = header_h + static_cast<int>(cells.size()) * (th + padding) + padding;
  Raster out(width, height, 24);

  for (std::size_t c = 0; c < column_headers.size() && c < cols; ++c) {
    const int x0 = label_w + padding + static_cast<int>(c) * (cell_w + padding);
    draw_text(out, x0 + (cell_w - text_width(column_headers[c])) / 2, padding, column_headers[c]);
  }
  for (std::size_t r = 0; r < cells.size(); ++r) {
    const int y0 = header_h + padding + static_cast<int>(r) * (th + padding);
    if (r < row_labels.size()) draw_text(out, padding, y0 + (th - 7) / 2, row_labels[r]);
    for (std::size_t c = 0; c < cells[r].size(); ++c) {
      const Tensor<float>& img = cells[r][c];
      if (img.shape.h != tile.h || img.shape.w != tile.w) {
        throw DomainError("compose_grid: tiles must share one size");
      }
      const Raster t = to_raster(img);
      const int x0 = label_w + padding + static_cast<int>(c) * (cell_w + padding) + (cell_w - tw) / 2;
      for (int y = 0; y < th; ++y) {
        std::copy_n(t.pixel(0, y), tw * 3, out.pixel(x0, y0 + y));
      }
    }
  }
  return out;
}

}  // namespace sdit
