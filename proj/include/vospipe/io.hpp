// File formats.
//
//   masks    8-bit palette-indexed PNG, palette index == object id
//   frames   binary PPM (P6) or 8-bit RGB/gray/palette PNG
//   tensors  "VOSP" raw little-endian container, also the carrier for
//            probability volumes and memory-bank checkpoints
//
// All round trips are bit-exact; headers are validated before payloads
// are touched.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "vospipe/image.hpp"
#include "vospipe/memory_bank.hpp"

namespace vospipe::io {

// --- raw tensor container ---------------------------------------------------

struct RawTensor {
  enum class Dtype : std::uint8_t { kU8 = 1, kF64 = 2 };

  Dtype dtype = Dtype::kF64;
  std::vector<std::uint64_t> dims;
  std::vector<std::uint8_t> u8;   // payload when dtype == kU8
  std::vector<double> f64;        // payload when dtype == kF64

  std::uint64_t element_count() const;
};

void write_tensor(std::ostream& out, const RawTensor& tensor);
RawTensor read_tensor(std::istream& in);

void write_tensor_file(const std::filesystem::path& path,
                       const RawTensor& tensor);
RawTensor read_tensor_file(const std::filesystem::path& path);

// --- masks ------------------------------------------------------------------

/// Palette-indexed PNG; indices are the object ids.
void write_mask(const std::filesystem::path& path, const LabelMask& mask);
LabelMask read_mask(const std::filesystem::path& path);

/// The standard 256-entry VOS palette (bit-interleaved colormap).
std::vector<std::uint8_t> standard_palette();

// --- frames -----------------------------------------------------------------

/// Extension selects the container: .ppm writes P6, .png writes RGB8 PNG.
void write_frame(const std::filesystem::path& path, const Frame& frame);
/// Sniffs the magic bytes; accepts P6 PPM and 8-bit gray/RGB/palette PNG.
Frame read_frame(const std::filesystem::path& path);

// --- probability volumes ----------------------------------------------------

void write_volume(const std::filesystem::path& path,
                  const ProbabilityVolume& volume);
ProbabilityVolume read_volume(const std::filesystem::path& path);

// --- memory bank checkpoints -------------------------------------------------

void save_bank(const std::filesystem::path& path, const mem::MemoryBank& bank);
mem::MemoryBank load_bank(const std::filesystem::path& path);

// --- directory helpers --------------------------------------------------------

/// Image files in `dir` sorted by filename; these are the video frames.
std::vector<std::filesystem::path> list_frames(
    const std::filesystem::path& dir);

}  // namespace vospipe::io
