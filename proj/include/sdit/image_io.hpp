#ifndef SDIT_IMAGE_IO_HPP
#define SDIT_IMAGE_IO_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sdit/tensor.hpp"

namespace sdit {

/// 8-bit interleaved RGB raster.
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Raster() = default;
  Raster(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, fill) {}
  std::uint8_t* pixel(int x, int y) { return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
  const std::uint8_t* pixel(int x, int y) const {
    return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
};

/// Decodes a PNG or JPEG file (detected from its signature). Throws DataError
/// naming the file when it cannot be decoded.
Raster read_raster(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Raster& raster);

/// [-1, 1] image of shape (1, h, w, 3) <-> 8-bit raster. Values are clamped
/// and rounded on the way out.
Tensor<float> to_tensor(const Raster& r);
Raster to_raster(const Tensor<float>& image, Index sample = 0);

Tensor<float> read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Tensor<float>& image, Index sample = 0);

/// Bilinear resampling with half-pixel centers; every sample of the batch.
Tensor<float> resize_bilinear(const Tensor<float>& images, Index out_h, Index out_w);
/// Central (h, w) window; throws DomainError when larger than the image.
Tensor<float> center_crop(const Tensor<float>& images, Index h, Index w);

/// Draws `text` with a 5x7 bitmap font; unsupported characters render blank.
void draw_text(Raster& r, int x, int y, const std::string& text, int scale = 1,
               std::uint8_t value = 255);
int text_width(const std::string& text, int scale = 1);

/// Grid of equally sized tiles. cells[row][col] is a (1, h, w, 3) image.
/// Column headers go above the first row, row labels to the left.
Raster compose_grid(const std::vector<std::vector<Tensor<float>>>& cells,
                    const std::vector<std::string>& column_headers,
                    const std::vector<std::string>& row_labels, int padding = 2);

}  // namespace sdit

#endif  // SDIT_IMAGE_IO_HPP
