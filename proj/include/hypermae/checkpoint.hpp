#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace hypermae {

struct NamedTensor {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<float> data;
    friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

/// Binary training snapshot ("TMCK").
///
/// Layout, little-endian: magic, u32 tensor count, tensors; optimizer section
/// with the same layout holding every "m.<name>" then every "v.<name>"; u64
/// step counter; u64 run seed. A tensor is u16 name length, UTF-8 name, u32
/// ndim, u32 dims[ndim], f32 data.
struct Checkpoint {
    std::vector<NamedTensor> params;
    std::vector<NamedTensor> first_moments;   ///< names without the "m." prefix
    std::vector<NamedTensor> second_moments;  ///< names without the "v." prefix
    std::uint64_t step = 0;
    std::uint64_t seed = 0;
    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt);
/// Throws FormatError on bad magic, truncation, trailing bytes or duplicate names.
Checkpoint decode_checkpoint(std::span<const unsigned char> bytes);

/// Writes to a temporary sibling and renames it into place.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Writes `bytes` to `path` via a temporary sibling and rename. Throws IoError.
void write_file_atomic(const std::filesystem::path& path, std::span<const unsigned char> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);
std::vector<unsigned char> read_file(const std::filesystem::path& path);

} // namespace hypermae
