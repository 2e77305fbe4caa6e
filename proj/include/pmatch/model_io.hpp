// model_io.hpp - versioned binary model container.
//
// Layout (little-endian): magic "PMM1", u32 format version, encoder config,
// u64 seed, vocabulary (u32 count, then per token u8 kind, u8 font, u32 byte
// length, bytes), u32 min_freq, tensors in for_each_parameter order (u32
// rows, u32 cols, f64 values), and a trailing u64 FNV-1a checksum of
// everything before it.
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "pmatch/model.hpp"

namespace pmatch {

inline constexpr char kModelMagic[4] = {'P', 'M', 'M', '1'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

std::string serialize_model(const ModelState& state);
/// FormatError on bad magic, version, shapes or checksum. `consumed`, when
/// given, receives the number of bytes read (checkpoints append data).
ModelState deserialize_model(std::string_view bytes, std::size_t* consumed = nullptr);

void save_model(const ModelState& state, const std::filesystem::path& path);
ModelState load_model(const std::filesystem::path& path);

std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::string_view bytes);

}  // namespace pmatch
