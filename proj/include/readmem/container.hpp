#ifndef READMEM_CONTAINER_HPP
#define READMEM_CONTAINER_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "readmem/stream.hpp"

namespace readmem {

// Embedding-stream container, little-endian:
//
//   "RMEM" | u16 version | u32 C_k | u32 C_v | u32 HW | u32 frame_count | u32 flags
//   per frame: query key (C_k*HW f32, row-major)
//              [qm key (C_k*HW f32), qm value (C_v*HW f32)]  unless flags bit 0
//              presence u8
//
// With flags bit 0 set the qm key aliases the query key and the qm value is
// rebuilt with derive_value() on load.
inline constexpr char kContainerMagic[4] = {'R', 'M', 'E', 'M'};
inline constexpr std::uint16_t kContainerVersion = 1;
inline constexpr std::uint32_t kFlagAliased = 1u;
inline constexpr std::size_t kContainerHeaderBytes = 4 + 2 + 5 * 4;

struct StreamFile {
  ShapeSpec shape;
  bool aliased = true;
  std::vector<FrameRecord> frames;
};

std::string encode_stream(const ShapeSpec& shape, bool aliased, const std::vector<FrameRecord>& frames);
/// Throws ContainerError on bad magic, unknown version, truncation or trailing bytes.
StreamFile decode_stream(const std::string& bytes);

std::size_t container_size(const ShapeSpec& shape, bool aliased, std::size_t frame_count);

/// key=value lines describing the spec that produced a stream.
std::string manifest_text(const StreamSpec& spec);
StreamSpec parse_manifest(const std::string& text);

/// Writes via a temporary file and rename so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

void write_stream_file(const std::filesystem::path& path, const StreamSpec& spec,
                       const std::vector<FrameRecord>& frames);
StreamFile read_stream_file(const std::filesystem::path& path);

std::filesystem::path manifest_path(const std::filesystem::path& stream_path);

}  // namespace readmem

#endif  // READMEM_CONTAINER_HPP
