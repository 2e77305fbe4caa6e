// config.hpp - run configuration shared by the CLI subcommands.
//
// Config files are flat `key = value` lines (`#` comments). Values from the
// command line override values from the file.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pmatch/corpus.hpp"
#include "pmatch/model.hpp"
#include "pmatch/symbols.hpp"
#include "pmatch/training.hpp"

namespace pmatch {

enum class Channel : std::uint8_t { Both, TextOnly, MathOnly };

const char* channel_name(Channel channel);
Channel parse_channel(std::string_view name);

/// Drops Text tokens (MathOnly) or Math tokens (TextOnly); Both is identity.
Corpus apply_channel(const Corpus& corpus, Channel channel);

enum class DecodeMode : std::uint8_t { Local, Global };

struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  Channel channel = Channel::Both;
  bool quiet = false;

  std::string corpus_path;
  std::string train_path;
  std::string dev_path;
  std::string test_path;
  std::string model_path;

  SplitMode split_mode = SplitMode::Mixed;
  double ratios[3] = {0.8, 0.1, 0.1};

  ReplacementKind level = ReplacementKind::Conservation;
  double alpha = 0.5;
  std::string protected_path;
  bool protect_probability = false;
  std::vector<std::string> levels;  // grid

  EncoderConfig encoder;
  std::uint32_t min_freq = 1;
  TrainConfig train;

  DecodeMode decode = DecodeMode::Local;
  std::optional<std::size_t> k;  // nullopt = all
  std::size_t block_rows = 1024;

  /// ConfigError naming the key on unknown keys or bad values.
  void set(std::string_view key, std::string_view value);

  /// All fields as `key -> value` strings in a fixed order (for manifests).
  std::vector<std::pair<std::string, std::string>> entries() const;

  ReplacementLevel replacement_level() const;
  ProtectedSet protected_set() const;

  /// ConfigError when one of `paths` is set but does not exist.
  static void require_existing(const std::vector<std::pair<std::string, std::string>>& paths);
};

/// Parses `key = value` lines; FormatError with the line number on garbage.
std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text);
std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path);

}  // namespace pmatch
