#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "blockcast/errors.hpp"

namespace blockcast {

/// Raw raster image, row-major, interleaved channels, 8 bits per sample.
struct ImageBuffer {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t channels = 1;  // 1 = grayscale, 3 = RGB
  std::vector<std::uint8_t> pixels;

  std::size_t byte_size() const {
    return static_cast<std::size_t>(width) * height * channels;
  }
  bool operator==(const ImageBuffer&) const = default;
};

/// Parses a binary PGM (P5) or PPM (P6) file with maxval 255.
ImageBuffer load_image(std::span<const std::uint8_t> file_bytes);
ImageBuffer load_image_file(const std::string& path);

/// Serializes to P5 (1 channel) or P6 (3 channels).
std::vector<std::uint8_t> encode_image(const ImageBuffer& image);
void save_image_file(const ImageBuffer& image, const std::string& path);

/// Tiling geometry: block i occupies grid cell (i % cols, i / cols).
struct BlockGrid {
  std::uint32_t image_width = 0;
  std::uint32_t image_height = 0;
  std::uint32_t channels = 1;
  std::uint32_t block_width = 0;
  std::uint32_t block_height = 0;

  std::uint32_t cols() const { return image_width / block_width; }
  std::uint32_t rows() const { return image_height / block_height; }
  std::size_t count() const {
    return static_cast<std::size_t>(cols()) * rows();
  }
  std::uint32_t block_bytes() const {
    return block_width * block_height * channels;
  }
  bool operator==(const BlockGrid&) const = default;
};

/// The raw bytes of one block, rows concatenated top to bottom.
struct BlockPayload {
  std::uint32_t block_id = 0;
  std::vector<std::uint8_t> bytes;
};

/// Validates divisibility and builds the grid for an image.
BlockGrid make_grid(const ImageBuffer& image, std::uint32_t block_width,
                    std::uint32_t block_height);

struct Tiling {
  BlockGrid grid;
  std::vector<BlockPayload> blocks;  // ordered by block id
};

/// Splits the image into block payloads, row-major over the grid.
Tiling tile(const ImageBuffer& image, std::uint32_t block_width,
            std::uint32_t block_height);

/// Image rebuilt from a subset of blocks; regions without a received block
/// hold the fill value.
struct PartialImage {
  BlockGrid grid;
  std::vector<bool> received;  // per block id
  ImageBuffer image;

  std::size_t received_count() const;
};

/// Writes the given payloads into a fill-initialized canvas. Duplicate ids
/// are allowed (payloads for the same id are identical by construction).
PartialImage reassemble(const BlockGrid& grid,
                        std::span<const BlockPayload> blocks,
                        std::uint8_t fill);

/// Inverse of tile: requires every block exactly once (duplicates allowed).
ImageBuffer untile(const BlockGrid& grid, std::span<const BlockPayload> blocks);

/// Fraction of pixels covered by received blocks. All blocks have the same
/// pixel count, so this equals received / total blocks.
double pixel_filling_rate(const PartialImage& partial);

struct RegionCoverage {
  double fraction = 0.0;
  bool full = false;
};

/// Fraction of the given block-id region that was received.
RegionCoverage region_coverage(const PartialImage& partial,
                               std::span<const std::uint32_t> region);

}  // namespace blockcast
