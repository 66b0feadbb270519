#include "png.hpp"

#include <zlib.h>

#include <array>
#include <cstring>
#include <fstream>

#include "reside/errors.hpp"

namespace reside::cli {

namespace {

void put_be32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

void write_chunk(std::ofstream& os, const char type[4], const std::string& data) {
  std::string head;
  put_be32(head, static_cast<std::uint32_t>(data.size()));
  os.write(head.data(), 4);
  os.write(type, 4);
  os.write(data.data(), static_cast<std::streamsize>(data.size()));
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(data.data()),
              static_cast<uInt>(data.size()));
  std::string tail;
  put_be32(tail, static_cast<std::uint32_t>(crc));
  os.write(tail.data(), 4);
}

}  // namespace

void write_png_gray8(const std::filesystem::path& path, std::size_t width,
                     std::size_t height, const std::vector<std::uint8_t>& pixels) {
  if (width == 0 || height == 0 || pixels.size() != width * height)
    throw ArgumentError("write_png_gray8: size mismatch");

  // One filter byte (0 = none) per scanline.
  std::vector<std::uint8_t> raw((width + 1) * height);
  for (std::size_t y = 0; y < height; ++y) {
    raw[y * (width + 1)] = 0;
    std::memcpy(raw.data() + y * (width + 1) + 1, pixels.data() + y * width, width);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()),
                Z_BEST_COMPRESSION) != Z_OK)
    throw Error("write_png_gray8: deflate failed");
  compressed.resize(bound);

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open for writing: " + path.string());
  static const std::array<unsigned char, 8> sig{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a,
                                                '\n'};
  os.write(reinterpret_cast<const char*>(sig.data()), sig.size());

  std::string ihdr;
  put_be32(ihdr, static_cast<std::uint32_t>(width));
  put_be32(ihdr, static_cast<std::uint32_t>(height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(0);  // grayscale
  ihdr.push_back(0);  // compression
  ihdr.push_back(0);  // filter
  ihdr.push_back(0);  // no interlace
  write_chunk(os, "IHDR", ihdr);
  write_chunk(os, "IDAT",
              std::string(reinterpret_cast<const char*>(compressed.data()),
                          compressed.size()));
  write_chunk(os, "IEND", "");
  if (!os) throw FormatError("write failed: " + path.string());
}

}  // namespace reside::cli
