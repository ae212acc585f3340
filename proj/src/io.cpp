#include "vospipe/io.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

namespace vospipe::io {

namespace {

constexpr char kMagic[4] = {'V', 'O', 'S', 'P'};
constexpr std::uint16_t kVersion = 1;

// --- little-endian scalar I/O ----------------------------------------------

template <typename T>
void write_le(std::ostream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<unsigned char>(
        (static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

template <typename T>
T read_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw IoError("tensor: truncated header");
  std::uint64_t value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  }
  return static_cast<T>(value);
}

void write_f64_le(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  write_le<std::uint64_t>(out, bits);
}

double read_f64_le(std::istream& in) {
  const std::uint64_t bits = read_le<std::uint64_t>(in);
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

}  // namespace

std::uint64_t RawTensor::element_count() const {
  std::uint64_t count = 1;
  for (std::uint64_t d : dims) {
    if (d != 0 && count > std::numeric_limits<std::uint64_t>::max() / d) {
      throw IoError("tensor: dimension product overflows");
    }
    count *= d;
  }
  return count;
}

void write_tensor(std::ostream& out, const RawTensor& tensor) {
  const std::uint64_t count = tensor.element_count();
  const std::size_t stored =
      tensor.dtype == RawTensor::Dtype::kU8 ? tensor.u8.size()
                                            : tensor.f64.size();
  if (stored != count) {
    throw IoError("tensor: payload length does not match dims");
  }
  out.write(kMagic, 4);
  write_le<std::uint16_t>(out, kVersion);
  write_le<std::uint8_t>(out, static_cast<std::uint8_t>(tensor.dtype));
  write_le<std::uint8_t>(out, static_cast<std::uint8_t>(tensor.dims.size()));
  for (std::uint64_t d : tensor.dims) write_le<std::uint64_t>(out, d);
  if (tensor.dtype == RawTensor::Dtype::kU8) {
    out.write(reinterpret_cast<const char*>(tensor.u8.data()),
              static_cast<std::streamsize>(tensor.u8.size()));
  } else {
    for (double v : tensor.f64) write_f64_le(out, v);
  }
  if (!out) throw IoError("tensor: write failed");
}

RawTensor read_tensor(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("tensor: bad magic");
  }
  const auto version = read_le<std::uint16_t>(in);
  if (version != kVersion) {
    throw FormatError("tensor: unsupported version " +
                      std::to_string(version));
  }
  const auto dtype_tag = read_le<std::uint8_t>(in);
  if (dtype_tag != static_cast<std::uint8_t>(RawTensor::Dtype::kU8) &&
      dtype_tag != static_cast<std::uint8_t>(RawTensor::Dtype::kF64)) {
    throw FormatError("tensor: unknown dtype tag " +
                      std::to_string(dtype_tag));
  }
  RawTensor tensor;
  tensor.dtype = static_cast<RawTensor::Dtype>(dtype_tag);
  const auto rank = read_le<std::uint8_t>(in);
  tensor.dims.resize(rank);
  for (auto& d : tensor.dims) d = read_le<std::uint64_t>(in);

  const std::uint64_t count = tensor.element_count();
  const std::uint64_t elem_size =
      tensor.dtype == RawTensor::Dtype::kU8 ? 1 : 8;
  if (count > std::numeric_limits<std::size_t>::max() / elem_size) {
    throw IoError("tensor: declared dims exceed addressable payload");
  }
  if (tensor.dtype == RawTensor::Dtype::kU8) {
    tensor.u8.resize(count);
    in.read(reinterpret_cast<char*>(tensor.u8.data()),
            static_cast<std::streamsize>(count));
    if (!in) throw IoError("tensor: truncated payload");
  } else {
    tensor.f64.resize(count);
    for (auto& v : tensor.f64) v = read_f64_le(in);
  }
  return tensor;
}

void write_tensor_file(const std::filesystem::path& path,
                       const RawTensor& tensor) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path.string());
  write_tensor(out, tensor);
}

RawTensor read_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  return read_tensor(in);
}

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

namespace {

constexpr unsigned char kPngSignature[8] = {0x89, 'P', 'N', 'G',
                                            0x0d, 0x0a, 0x1a, 0x0a};

void write_be32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

std::uint32_t read_be32(const unsigned char* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) |
         (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) |
         static_cast<std::uint32_t>(p[3]);
}

void append_chunk(std::string& out, const char type[4],
                  const std::string& payload) {
  write_be32(out, static_cast<std::uint32_t>(payload.size()));
  std::string body(type, 4);
  body += payload;
  out += body;
  const auto crc =
      crc32(0L, reinterpret_cast<const Bytef*>(body.data()),
            static_cast<uInt>(body.size()));
  write_be32(out, static_cast<std::uint32_t>(crc));
}

std::string zlib_deflate(const std::string& raw) {
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::string out(bound, '\0');
  const int rc = compress2(reinterpret_cast<Bytef*>(out.data()), &bound,
                           reinterpret_cast<const Bytef*>(raw.data()),
                           static_cast<uLong>(raw.size()), 6);
  if (rc != Z_OK) throw IoError("png: deflate failed");
  out.resize(bound);
  return out;
}

std::string zlib_inflate(const std::string& compressed,
                         std::size_t expected_size) {
  std::string out(expected_size, '\0');
  uLongf dest_len = static_cast<uLongf>(expected_size);
  const int rc =
      uncompress(reinterpret_cast<Bytef*>(out.data()), &dest_len,
                 reinterpret_cast<const Bytef*>(compressed.data()),
                 static_cast<uLong>(compressed.size()));
  if (rc != Z_OK || dest_len != expected_size) {
    throw FormatError("png: corrupt or truncated image data");
  }
  return out;
}

struct PngImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint8_t bit_depth = 0;
  std::uint8_t color_type = 0;  // 0 gray, 2 rgb, 3 palette
  std::vector<std::uint8_t> palette;  // rgb triples for color_type 3
  std::vector<std::uint8_t> pixels;   // unfiltered scanline bytes
};

int png_bytes_per_pixel(std::uint8_t color_type) {
  switch (color_type) {
    case 0: return 1;
    case 2: return 3;
    case 3: return 1;
    default: return 0;
  }
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a);
  const int pb = std::abs(p - b);
  const int pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

void write_png(const std::filesystem::path& path, std::uint32_t width,
               std::uint32_t height, std::uint8_t color_type,
               const std::vector<std::uint8_t>& palette,
               const std::vector<std::uint8_t>& pixels) {
  const int bpp = png_bytes_per_pixel(color_type);
  std::string raw;
  raw.reserve(static_cast<std::size_t>(height) * (width * bpp + 1));
  for (std::uint32_t y = 0; y < height; ++y) {
    raw.push_back('\0');  // filter type 0 on every row
    raw.append(reinterpret_cast<const char*>(pixels.data()) +
                   static_cast<std::size_t>(y) * width * bpp,
               static_cast<std::size_t>(width) * bpp);
  }

  std::string file(reinterpret_cast<const char*>(kPngSignature), 8);
  std::string ihdr;
  write_be32(ihdr, width);
  write_be32(ihdr, height);
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(static_cast<char>(color_type));
  ihdr.push_back(0);  // compression
  ihdr.push_back(0);  // filter method
  ihdr.push_back(0);  // no interlace
  append_chunk(file, "IHDR", ihdr);
  if (color_type == 3) {
    append_chunk(file,
                 "PLTE", std::string(palette.begin(), palette.end()));
  }
  append_chunk(file, "IDAT", zlib_deflate(raw));
  append_chunk(file, "IEND", "");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path.string());
  out.write(file.data(), static_cast<std::streamsize>(file.size()));
  if (!out) throw IoError("png: write failed: " + path.string());
}

PngImage read_png(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::string contents((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
  const auto* bytes = reinterpret_cast<const unsigned char*>(contents.data());
  if (contents.size() < 8 || std::memcmp(bytes, kPngSignature, 8) != 0) {
    throw FormatError("png: bad signature: " + path.string());
  }

  PngImage img;
  std::string idat;
  std::size_t pos = 8;
  bool saw_ihdr = false;
  while (pos + 8 <= contents.size()) {
    const std::uint32_t length = read_be32(bytes + pos);
    if (pos + 12 + length > contents.size()) {
      throw FormatError("png: truncated chunk");
    }
    const std::string type(contents, pos + 4, 4);
    const unsigned char* data = bytes + pos + 8;
    const std::uint32_t stored_crc = read_be32(bytes + pos + 8 + length);
    const auto computed_crc =
        crc32(0L, bytes + pos + 4, static_cast<uInt>(length + 4));
    if (stored_crc != static_cast<std::uint32_t>(computed_crc)) {
      throw FormatError("png: chunk crc mismatch");
    }

    if (type == "IHDR") {
      if (length != 13) throw FormatError("png: malformed IHDR");
      img.width = read_be32(data);
      img.height = read_be32(data + 4);
      img.bit_depth = data[8];
      img.color_type = data[9];
      if (img.width == 0 || img.height == 0) {
        throw FormatError("png: zero dimension");
      }
      if (img.bit_depth != 8) {
        throw FormatError("png: only 8-bit images are supported");
      }
      if (png_bytes_per_pixel(img.color_type) == 0) {
        throw FormatError("png: unsupported color type " +
                          std::to_string(img.color_type));
      }
      if (data[12] != 0) throw FormatError("png: interlace not supported");
      saw_ihdr = true;
    } else if (type == "PLTE") {
      img.palette.assign(data, data + length);
    } else if (type == "IDAT") {
      idat.append(reinterpret_cast<const char*>(data), length);
    } else if (type == "IEND") {
      break;
    }
    pos += 12 + length;
  }
  if (!saw_ihdr) throw FormatError("png: missing IHDR");
  if (idat.empty()) throw FormatError("png: missing image data");
  if (img.color_type == 3 && img.palette.empty()) {
    throw FormatError("png: palette image without PLTE");
  }

  const int bpp = png_bytes_per_pixel(img.color_type);
  const std::size_t stride = static_cast<std::size_t>(img.width) * bpp;
  const std::size_t raw_size = (stride + 1) * img.height;
  const std::string raw = zlib_inflate(idat, raw_size);

  img.pixels.resize(stride * img.height);
  std::vector<std::uint8_t> prev(stride, 0);
  for (std::uint32_t y = 0; y < img.height; ++y) {
    const auto* row =
        reinterpret_cast<const unsigned char*>(raw.data()) + y * (stride + 1);
    const std::uint8_t filter = row[0];
    std::uint8_t* out = img.pixels.data() + y * stride;
    for (std::size_t i = 0; i < stride; ++i) {
      const int x = row[1 + i];
      const int a = i >= static_cast<std::size_t>(bpp) ? out[i - bpp] : 0;
      const int b = prev[i];
      const int c = i >= static_cast<std::size_t>(bpp) ? prev[i - bpp] : 0;
      int value = 0;
      switch (filter) {
        case 0: value = x; break;
        case 1: value = x + a; break;
        case 2: value = x + b; break;
        case 3: value = x + (a + b) / 2; break;
        case 4: value = x + paeth(a, b, c); break;
        default: throw FormatError("png: unknown scanline filter");
      }
      out[i] = static_cast<std::uint8_t>(value & 0xff);
    }
    std::copy(out, out + stride, prev.begin());
  }
  return img;
}

}  // namespace

std::vector<std::uint8_t> standard_palette() {
  std::vector<std::uint8_t> palette(256 * 3, 0);
  for (int i = 0; i < 256; ++i) {
    int id = i;
    std::uint8_t r = 0, g = 0, b = 0;
    for (int j = 0; j < 8 && id != 0; ++j) {
      r = static_cast<std::uint8_t>(r | ((id & 1) << (7 - j)));
      g = static_cast<std::uint8_t>(g | (((id >> 1) & 1) << (7 - j)));
      b = static_cast<std::uint8_t>(b | (((id >> 2) & 1) << (7 - j)));
      id >>= 3;
    }
    palette[static_cast<std::size_t>(i) * 3 + 0] = r;
    palette[static_cast<std::size_t>(i) * 3 + 1] = g;
    palette[static_cast<std::size_t>(i) * 3 + 2] = b;
  }
  return palette;
}

void write_mask(const std::filesystem::path& path, const LabelMask& mask) {
  if (mask.width < 1 || mask.height < 1) {
    throw ShapeError("write_mask: empty mask");
  }
  write_png(path, static_cast<std::uint32_t>(mask.width),
            static_cast<std::uint32_t>(mask.height), 3, standard_palette(),
            mask.labels);
}

LabelMask read_mask(const std::filesystem::path& path) {
  const PngImage img = read_png(path);
  if (img.color_type != 3) {
    throw FormatError("mask must be a palette-indexed image: " +
                      path.string());
  }
  LabelMask mask(static_cast<int>(img.width), static_cast<int>(img.height));
  mask.labels = img.pixels;
  return mask;
}

// ---------------------------------------------------------------------------
// Frames
// ---------------------------------------------------------------------------

namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(
      std::clamp(std::lround(v * 255.0), 0L, 255L));
}

void write_ppm(const std::filesystem::path& path, const Frame& frame) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path.string());
  out << "P6\n" << frame.width << " " << frame.height << "\n255\n";
  std::vector<std::uint8_t> bytes(frame.pixels() * 3);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = to_byte(frame.data[i]);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("ppm: write failed: " + path.string());
}

Frame read_ppm(std::ifstream& in, const std::filesystem::path& path) {
  std::string magic;
  in >> magic;
  if (magic != "P6") throw FormatError("ppm: unsupported magic: " + magic);
  int width = 0, height = 0, maxval = 0;
  // Skip whitespace and # comments between header tokens.
  auto next_int = [&](int& value) {
    while (true) {
      const int c = in.peek();
      if (c == '#') {
        std::string line;
        std::getline(in, line);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
    }
    in >> value;
  };
  next_int(width);
  next_int(height);
  next_int(maxval);
  if (!in || width < 1 || height < 1) {
    throw FormatError("ppm: malformed header: " + path.string());
  }
  if (maxval != 255) throw FormatError("ppm: only maxval 255 is supported");
  in.get();  // single whitespace after maxval
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(width) * height *
                                  3);
  in.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!in) throw IoError("ppm: truncated pixel data: " + path.string());
  Frame frame(width, height);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    frame.data[i] = bytes[i] / 255.0;
  }
  return frame;
}

}  // namespace

void write_frame(const std::filesystem::path& path, const Frame& frame) {
  frame.validate("write_frame");
  if (path.extension() == ".ppm") {
    write_ppm(path, frame);
    return;
  }
  if (path.extension() == ".png") {
    std::vector<std::uint8_t> bytes(frame.pixels() * 3);
    for (std::size_t i = 0; i < bytes.size(); ++i) {
      bytes[i] = to_byte(frame.data[i]);
    }
    write_png(path, static_cast<std::uint32_t>(frame.width),
              static_cast<std::uint32_t>(frame.height), 2, {}, bytes);
    return;
  }
  throw FormatError("write_frame: unsupported extension " +
                    path.extension().string());
}

Frame read_frame(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  const int first = in.peek();
  if (first == 'P') {
    return read_ppm(in, path);
  }
  in.close();

  const PngImage img = read_png(path);
  Frame frame(static_cast<int>(img.width), static_cast<int>(img.height));
  const std::size_t n = frame.pixels();
  if (img.color_type == 2) {
    for (std::size_t i = 0; i < n * 3; ++i) frame.data[i] = img.pixels[i] / 255.0;
  } else if (img.color_type == 0) {
    for (std::size_t i = 0; i < n; ++i) {
      const double v = img.pixels[i] / 255.0;
      frame.data[i * 3 + 0] = v;
      frame.data[i * 3 + 1] = v;
      frame.data[i * 3 + 2] = v;
    }
  } else {  // palette
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t idx = static_cast<std::size_t>(img.pixels[i]) * 3;
      if (idx + 2 >= img.palette.size()) {
        throw FormatError("png: palette index out of range");
      }
      frame.data[i * 3 + 0] = img.palette[idx + 0] / 255.0;
      frame.data[i * 3 + 1] = img.palette[idx + 1] / 255.0;
      frame.data[i * 3 + 2] = img.palette[idx + 2] / 255.0;
    }
  }
  return frame;
}

// ---------------------------------------------------------------------------
// Probability volumes
// ---------------------------------------------------------------------------

void write_volume(const std::filesystem::path& path,
                  const ProbabilityVolume& volume) {
  RawTensor tensor;
  tensor.dtype = RawTensor::Dtype::kF64;
  tensor.dims = {static_cast<std::uint64_t>(volume.planes),
                 static_cast<std::uint64_t>(volume.height),
                 static_cast<std::uint64_t>(volume.width)};
  tensor.f64 = volume.data;
  write_tensor_file(path, tensor);
}

ProbabilityVolume read_volume(const std::filesystem::path& path) {
  const RawTensor tensor = read_tensor_file(path);
  if (tensor.dtype != RawTensor::Dtype::kF64 || tensor.dims.size() != 3) {
    throw FormatError("volume: expected rank-3 f64 tensor: " + path.string());
  }
  ProbabilityVolume volume(static_cast<int>(tensor.dims[2]),
                           static_cast<int>(tensor.dims[1]),
                           static_cast<int>(tensor.dims[0]));
  volume.data = tensor.f64;
  return volume;
}

// ---------------------------------------------------------------------------
// Memory bank checkpoints
// ---------------------------------------------------------------------------

namespace {

RawTensor f64_tensor(std::vector<double> values,
                     std::vector<std::uint64_t> dims) {
  RawTensor t;
  t.dtype = RawTensor::Dtype::kF64;
  t.dims = std::move(dims);
  t.f64 = std::move(values);
  return t;
}

RawTensor matrix_tensor(const EmbeddingMatrix& m) {
  return f64_tensor(m.data(), {m.rows(), m.cols()});
}

EmbeddingMatrix tensor_matrix(const RawTensor& t) {
  if (t.dtype != RawTensor::Dtype::kF64 || t.dims.size() != 2) {
    throw FormatError("bank: expected rank-2 f64 tensor");
  }
  return EmbeddingMatrix::from_data(static_cast<std::size_t>(t.dims[0]),
                                    static_cast<std::size_t>(t.dims[1]),
                                    t.f64);
}

}  // namespace

void save_bank(const std::filesystem::path& path,
               const mem::MemoryBank& bank) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path.string());
  const mem::MemoryPolicy& p = bank.policy();
  write_tensor(out, f64_tensor({static_cast<double>(static_cast<int>(p.kind)),
                                static_cast<double>(p.capacity),
                                static_cast<double>(p.stride),
                                static_cast<double>(p.expected_length),
                                static_cast<double>(bank.last_seen_index()),
                                static_cast<double>(bank.entries().size())},
                               {6}));
  for (const mem::MemoryEntry& e : bank.entries()) {
    write_tensor(out, f64_tensor({static_cast<double>(e.frame_index)}, {1}));
    write_tensor(out, matrix_tensor(e.keys));
    write_tensor(out, matrix_tensor(e.values));
    write_tensor(out, matrix_tensor(e.identity.vectors));
  }
}

mem::MemoryBank load_bank(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  const RawTensor meta = read_tensor(in);
  if (meta.dtype != RawTensor::Dtype::kF64 || meta.f64.size() != 6) {
    throw FormatError("bank: malformed checkpoint header");
  }
  const int kind_tag = static_cast<int>(meta.f64[0]);
  if (kind_tag < 0 || kind_tag > 2) {
    throw FormatError("bank: unknown sampling policy tag " +
                      std::to_string(kind_tag));
  }
  mem::MemoryPolicy policy;
  policy.kind = static_cast<mem::SamplingPolicy>(kind_tag);
  policy.capacity = static_cast<std::size_t>(meta.f64[1]);
  policy.stride = static_cast<std::int64_t>(meta.f64[2]);
  policy.expected_length = static_cast<std::int64_t>(meta.f64[3]);
  const auto last_seen = static_cast<std::int64_t>(meta.f64[4]);
  const auto entry_count = static_cast<std::size_t>(meta.f64[5]);

  std::vector<mem::MemoryEntry> entries;
  entries.reserve(entry_count);
  for (std::size_t i = 0; i < entry_count; ++i) {
    const RawTensor idx = read_tensor(in);
    if (idx.f64.size() != 1) throw FormatError("bank: malformed entry index");
    mem::MemoryEntry entry;
    entry.frame_index = static_cast<std::int64_t>(idx.f64[0]);
    entry.keys = tensor_matrix(read_tensor(in));
    entry.values = tensor_matrix(read_tensor(in));
    entry.identity.vectors = tensor_matrix(read_tensor(in));
    entries.push_back(std::move(entry));
  }
  return mem::MemoryBank::restore(std::move(entries), policy, last_seen);
}

// ---------------------------------------------------------------------------
// Directory helpers
// ---------------------------------------------------------------------------

std::vector<std::filesystem::path> list_frames(
    const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw InputError("not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension();
    if (ext == ".ppm" || ext == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace vospipe::io
