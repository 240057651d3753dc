#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mst/tensor.hpp"

namespace mst {

/// CRC-32 (IEEE 802.3, reflected, poly 0xEDB88320) over a byte buffer.
std::uint32_t crc32(const std::uint8_t* data, std::size_t len);

/// Bit-exact checkpoint container. Layout:
///   magic "MSTX1" (5 bytes)
///   tensor count        u32 LE
///   per tensor: name length u32 LE, UTF-8 name, rank u32 LE,
///               dims u32 LE each, float32 LE data (row-major)
///   config block: UTF-8 "key=value\n" lines, sorted by key
///   CRC-32 of all preceding bytes, u32 LE
/// Values are narrowed to 32-bit floats on write and widened back on read.
struct CheckpointData {
    std::vector<std::pair<std::string, Tensor>> tensors; // model order preserved
    std::map<std::string, std::string> config;
};

void write_checkpoint(const CheckpointData& data, const std::string& path);

/// Throws FormatError on a bad magic, CorruptionError on CRC mismatch or
/// truncation.
CheckpointData read_checkpoint(const std::string& path);

/// Exact on-disk size in bytes for the given contents.
std::size_t checkpoint_size(const CheckpointData& data);

} // namespace mst
