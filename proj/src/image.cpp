#include "blockcast/image.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace blockcast {

namespace {

bool is_space(std::uint8_t c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n';
}

// Cursor over the header section of a PNM file. '#' starts a comment that
// runs to end of line and counts as whitespace.
struct HeaderCursor {
  std::span<const std::uint8_t> data;
  std::size_t pos = 0;

  void skip_space_and_comments() {
    while (pos < data.size()) {
      if (is_space(data[pos])) {
        ++pos;
      } else if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  }

  std::uint64_t read_uint() {
    skip_space_and_comments();
    if (pos >= data.size() || data[pos] < '0' || data[pos] > '9') {
      throw Error("malformed image header: expected an integer");
    }
    std::uint64_t value = 0;
    while (pos < data.size() && data[pos] >= '0' && data[pos] <= '9') {
      value = value * 10 + (data[pos] - '0');
      if (value > 1'000'000'000ULL) {
        throw Error("malformed image header: integer out of range");
      }
      ++pos;
    }
    return value;
  }
};

}  // namespace

ImageBuffer load_image(std::span<const std::uint8_t> file_bytes) {
  if (file_bytes.size() < 2 || file_bytes[0] != 'P') {
    throw Error("malformed image header: not a binary PGM/PPM file");
  }
  std::uint32_t channels = 0;
  if (file_bytes[1] == '5') {
    channels = 1;
  } else if (file_bytes[1] == '6') {
    channels = 3;
  } else {
    throw Error("unsupported image format: only binary P5/P6 are accepted");
  }

  HeaderCursor cur{file_bytes, 2};
  const std::uint64_t width = cur.read_uint();
  const std::uint64_t height = cur.read_uint();
  const std::uint64_t maxval = cur.read_uint();
  if (width < 1 || height < 1) {
    throw Error("malformed image header: zero dimension");
  }
  if (maxval != 255) {
    throw Error("unsupported image: maxval must be 255");
  }
  // Exactly one whitespace byte separates the header from the payload.
  if (cur.pos >= file_bytes.size() || !is_space(file_bytes[cur.pos])) {
    throw Error("malformed image header: missing payload separator");
  }
  ++cur.pos;

  const std::size_t expected = static_cast<std::size_t>(width) * height * channels;
  const std::size_t available = file_bytes.size() - cur.pos;
  if (available < expected) {
    throw Error("truncated image payload");
  }
  if (available > expected) {
    throw Error("trailing bytes after image payload");
  }

  ImageBuffer image;
  image.width = static_cast<std::uint32_t>(width);
  image.height = static_cast<std::uint32_t>(height);
  image.channels = channels;
  image.pixels.assign(file_bytes.begin() + cur.pos, file_bytes.end());
  return image;
}

ImageBuffer load_image_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open image file: " + path);
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return load_image(bytes);
}

std::vector<std::uint8_t> encode_image(const ImageBuffer& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw Error("unsupported channel count: must be 1 or 3");
  }
  if (image.pixels.size() != image.byte_size()) {
    throw Error("pixel buffer length does not match dimensions");
  }
  char header[64];
  const int n = std::snprintf(header, sizeof header, "P%c\n%u %u\n255\n",
                              image.channels == 1 ? '5' : '6', image.width,
                              image.height);
  std::vector<std::uint8_t> out(header, header + n);
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

void save_image_file(const ImageBuffer& image, const std::string& path) {
  const auto bytes = encode_image(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error("cannot open output file: " + path);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error("write failed: " + path);
  }
}

BlockGrid make_grid(const ImageBuffer& image, std::uint32_t block_width,
                    std::uint32_t block_height) {
  if (block_width < 1 || block_height < 1) {
    throw Error("block dimensions must be >= 1");
  }
  if (image.width % block_width != 0 || image.height % block_height != 0) {
    throw Error("block dimensions must divide the image dimensions");
  }
  BlockGrid grid;
  grid.image_width = image.width;
  grid.image_height = image.height;
  grid.channels = image.channels;
  grid.block_width = block_width;
  grid.block_height = block_height;
  return grid;
}

Tiling tile(const ImageBuffer& image, std::uint32_t block_width,
            std::uint32_t block_height) {
  if (image.pixels.size() != image.byte_size()) {
    throw Error("pixel buffer length does not match dimensions");
  }
  Tiling tiling;
  tiling.grid = make_grid(image, block_width, block_height);
  const BlockGrid& g = tiling.grid;
  const std::size_t row_stride =
      static_cast<std::size_t>(g.image_width) * g.channels;
  const std::size_t block_row_bytes =
      static_cast<std::size_t>(g.block_width) * g.channels;

  tiling.blocks.reserve(g.count());
  for (std::uint32_t id = 0; id < g.count(); ++id) {
    const std::uint32_t cx = id % g.cols();
    const std::uint32_t cy = id / g.cols();
    BlockPayload payload;
    payload.block_id = id;
    payload.bytes.reserve(g.block_bytes());
    for (std::uint32_t y = 0; y < g.block_height; ++y) {
      const std::size_t offset =
          (static_cast<std::size_t>(cy) * g.block_height + y) * row_stride +
          static_cast<std::size_t>(cx) * block_row_bytes;
      payload.bytes.insert(payload.bytes.end(), image.pixels.begin() + offset,
                           image.pixels.begin() + offset + block_row_bytes);
    }
    tiling.blocks.push_back(std::move(payload));
  }
  return tiling;
}

std::size_t PartialImage::received_count() const {
  return static_cast<std::size_t>(
      std::count(received.begin(), received.end(), true));
}

PartialImage reassemble(const BlockGrid& grid,
                        std::span<const BlockPayload> blocks,
                        std::uint8_t fill) {
  PartialImage partial;
  partial.grid = grid;
  partial.received.assign(grid.count(), false);
  partial.image.width = grid.image_width;
  partial.image.height = grid.image_height;
  partial.image.channels = grid.channels;
  partial.image.pixels.assign(partial.image.byte_size(), fill);

  const std::size_t row_stride =
      static_cast<std::size_t>(grid.image_width) * grid.channels;
  const std::size_t block_row_bytes =
      static_cast<std::size_t>(grid.block_width) * grid.channels;

  for (const BlockPayload& payload : blocks) {
    if (payload.block_id >= grid.count()) {
      throw Error("block id out of range");
    }
    if (payload.bytes.size() != grid.block_bytes()) {
      throw Error("block payload length mismatch");
    }
    const std::uint32_t cx = payload.block_id % grid.cols();
    const std::uint32_t cy = payload.block_id / grid.cols();
    for (std::uint32_t y = 0; y < grid.block_height; ++y) {
      const std::size_t offset =
          (static_cast<std::size_t>(cy) * grid.block_height + y) * row_stride +
          static_cast<std::size_t>(cx) * block_row_bytes;
      std::copy_n(payload.bytes.begin() +
                      static_cast<std::size_t>(y) * block_row_bytes,
                  block_row_bytes, partial.image.pixels.begin() + offset);
    }
    partial.received[payload.block_id] = true;
  }
  return partial;
}

ImageBuffer untile(const BlockGrid& grid,
                   std::span<const BlockPayload> blocks) {
  PartialImage partial = reassemble(grid, blocks, 0);
  if (partial.received_count() != grid.count()) {
    throw Error("untile requires every block");
  }
  return std::move(partial.image);
}

double pixel_filling_rate(const PartialImage& partial) {
  return static_cast<double>(partial.received_count()) /
         static_cast<double>(partial.grid.count());
}

RegionCoverage region_coverage(const PartialImage& partial,
                               std::span<const std::uint32_t> region) {
  if (region.empty()) {
    throw Error("empty region");
  }
  std::size_t hit = 0;
  for (std::uint32_t id : region) {
    if (id >= partial.grid.count()) {
      throw Error("region block id out of range");
    }
    if (partial.received[id]) ++hit;
  }
  RegionCoverage cov;
  cov.fraction = static_cast<double>(hit) / static_cast<double>(region.size());
  cov.full = hit == region.size();
  return cov;
}

}  // namespace blockcast
