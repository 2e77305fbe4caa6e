#include "pmatch/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pmatch/error.hpp"

namespace pmatch {
namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view why = "") {
  std::string msg = "invalid value '" + std::string(value) + "' for '" + std::string(key) + "'";
  if (!why.empty()) msg += ": " + std::string(why);
  throw Error(ErrorCode::ConfigError, msg);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto v = trim(value);
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) bad_value(key, value);
  return out;
}

double parse_real(std::string_view key, std::string_view value) {
  const auto v = trim(value);
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) bad_value(key, value);
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  const auto v = trim(value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, value);
}

std::vector<std::string> split_list(std::string_view value) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : value) {
    if (c == ',') {
      if (auto t = trim(cur); !t.empty()) out.push_back(t);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (auto t = trim(cur); !t.empty()) out.push_back(t);
  return out;
}

std::string real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

const char* channel_name(Channel channel) {
  switch (channel) {
    case Channel::Both: return "both";
    case Channel::TextOnly: return "text";
    case Channel::MathOnly: return "math";
  }
  return "both";
}

Channel parse_channel(std::string_view name) {
  if (name == "both") return Channel::Both;
  if (name == "text" || name == "text-only") return Channel::TextOnly;
  if (name == "math" || name == "math-only") return Channel::MathOnly;
  throw Error(ErrorCode::ConfigError, "invalid value '" + std::string(name) + "' for 'channel'");
}

Corpus apply_channel(const Corpus& corpus, Channel channel) {
  if (channel == Channel::Both) return corpus;
  const TokenKind keep = channel == Channel::TextOnly ? TokenKind::Text : TokenKind::Math;
  Corpus out;
  out.split_tag = corpus.split_tag;
  for (const auto& p : corpus.pairs) {
    PairRecord r = p;
    std::erase_if(r.statement, [&](const Token& t) { return t.kind != keep; });
    std::erase_if(r.proof, [&](const Token& t) { return t.kind != keep; });
    out.pairs.push_back(std::move(r));
  }
  return out;
}

void RunConfig::set(std::string_view key, std::string_view raw) {
  const std::string value = trim(raw);
  try {
    if (key == "seed") {
      seed = parse_number<std::uint64_t>(key, value);
      train.seed = seed;
    } else if (key == "out_dir" || key == "out-dir") {
      out_dir = value;
    } else if (key == "channel") {
      channel = parse_channel(value);
    } else if (key == "quiet") {
      quiet = parse_bool(key, value);
    } else if (key == "corpus") {
      corpus_path = value;
    } else if (key == "train") {
      train_path = value;
    } else if (key == "dev") {
      dev_path = value;
    } else if (key == "test") {
      test_path = value;
    } else if (key == "model") {
      model_path = value;
    } else if (key == "mode") {
      if (value == "mixed") split_mode = SplitMode::Mixed;
      else if (value == "unmixed") split_mode = SplitMode::Unmixed;
      else bad_value(key, value, "expected mixed or unmixed");
    } else if (key == "ratios") {
      const auto parts = split_list(value);
      if (parts.size() != 3) bad_value(key, value, "expected three comma-separated fractions");
      for (std::size_t i = 0; i < 3; ++i) ratios[i] = parse_real(key, parts[i]);
    } else if (key == "level") {
      level = parse_replacement_kind(value);
    } else if (key == "alpha") {
      alpha = parse_real(key, value);
      if (alpha < 0.0 || alpha > 1.0) bad_value(key, value, "alpha must be in [0, 1]");
    } else if (key == "protected") {
      protected_path = value;
    } else if (key == "protect_probability") {
      protect_probability = parse_bool(key, value);
    } else if (key == "levels") {
      levels = split_list(value);
      for (const auto& l : levels) parse_replacement_kind(l);
    } else if (key == "encoder") {
      encoder.kind = parse_encoder_kind(value);
    } else if (key == "d") {
      encoder.d = parse_number<std::uint32_t>(key, value);
    } else if (key == "layers") {
      encoder.layers = parse_number<std::uint32_t>(key, value);
    } else if (key == "heads") {
      encoder.heads = parse_number<std::uint32_t>(key, value);
    } else if (key == "d_k") {
      encoder.d_k = parse_number<std::uint32_t>(key, value);
    } else if (key == "pooling") {
      encoder.pooling = parse_pooling(value);
    } else if (key == "min_freq") {
      min_freq = parse_number<std::uint32_t>(key, value);
      if (min_freq < 1) bad_value(key, value, "min_freq must be at least 1");
    } else if (key == "objective") {
      train.objective = parse_objective(value);
    } else if (key == "batch_size") {
      train.batch_size = parse_number<std::size_t>(key, value);
    } else if (key == "epochs") {
      train.epochs = parse_number<std::size_t>(key, value);
    } else if (key == "lr") {
      train.lr = parse_real(key, value);
    } else if (key == "optimizer") {
      train.optimizer = parse_optimizer(value);
    } else if (key == "lr_decay") {
      train.lr_decay = parse_real(key, value);
    } else if (key == "eval_every") {
      train.eval_every = parse_number<std::size_t>(key, value);
    } else if (key == "clip_norm") {
      train.clip_norm = parse_real(key, value);
    } else if (key == "decode") {
      if (value == "local") decode = DecodeMode::Local;
      else if (value == "global") decode = DecodeMode::Global;
      else bad_value(key, value, "expected local or global");
    } else if (key == "k") {
      if (value == "all") k.reset();
      else k = parse_number<std::size_t>(key, value);
      if (k && *k == 0) bad_value(key, value, "k must be positive");
    } else if (key == "block_rows") {
      block_rows = parse_number<std::size_t>(key, value);
    } else {
      throw Error(ErrorCode::ConfigError, "unknown config key '" + std::string(key) + "'");
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError && std::string(e.what()).find('\'' + std::string(key) + '\'') !=
                                                  std::string::npos) {
      throw;
    }
    throw Error(ErrorCode::ConfigError, "field '" + std::string(key) + "': " + e.what());
  }
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  std::string level_list;
  for (const auto& l : levels) level_list += (level_list.empty() ? "" : ",") + l;
  return {
      {"seed", std::to_string(seed)},
      {"out_dir", out_dir},
      {"channel", channel_name(channel)},
      {"corpus", corpus_path},
      {"train", train_path},
      {"dev", dev_path},
      {"test", test_path},
      {"model", model_path},
      {"mode", split_mode == SplitMode::Mixed ? "mixed" : "unmixed"},
      {"ratios", real(ratios[0]) + "," + real(ratios[1]) + "," + real(ratios[2])},
      {"level", replacement_kind_name(level)},
      {"alpha", real(alpha)},
      {"protected", protected_path},
      {"protect_probability", protect_probability ? "true" : "false"},
      {"levels", level_list},
      {"encoder", encoder_kind_name(encoder.kind)},
      {"d", std::to_string(encoder.d)},
      {"layers", std::to_string(encoder.layers)},
      {"heads", std::to_string(encoder.heads)},
      {"d_k", std::to_string(encoder.d_k)},
      {"pooling", pooling_name(encoder.pooling)},
      {"min_freq", std::to_string(min_freq)},
      {"objective", objective_name(train.objective)},
      {"batch_size", std::to_string(train.batch_size)},
      {"epochs", std::to_string(train.epochs)},
      {"lr", real(train.lr)},
      {"optimizer", optimizer_name(train.optimizer)},
      {"lr_decay", real(train.lr_decay)},
      {"eval_every", std::to_string(train.eval_every)},
      {"clip_norm", real(train.clip_norm)},
      {"decode", decode == DecodeMode::Local ? "local" : "global"},
      {"k", k ? std::to_string(*k) : "all"},
      {"block_rows", std::to_string(block_rows)},
  };
}

ReplacementLevel RunConfig::replacement_level() const {
  switch (level) {
    case ReplacementKind::Conservation: return ReplacementLevel::conservation();
    case ReplacementKind::Partial: return ReplacementLevel::partial(alpha);
    case ReplacementKind::Full: return ReplacementLevel::full();
    case ReplacementKind::Transposition: return ReplacementLevel::transposition();
  }
  return ReplacementLevel::conservation();
}

ProtectedSet RunConfig::protected_set() const {
  ProtectedSet set;
  if (protect_probability) set = ProtectedSet::probability();
  if (!protected_path.empty()) {
    const auto extra = read_protected_set(protected_path);
    set.keys.insert(extra.keys.begin(), extra.keys.end());
    if (set.domain_label.empty()) set.domain_label = extra.domain_label;
  }
  return set;
}

void RunConfig::require_existing(const std::vector<std::pair<std::string, std::string>>& paths) {
  for (const auto& [field, path] : paths) {
    if (path.empty()) throw Error(ErrorCode::ConfigError, "field '" + field + "' is required");
    if (!std::filesystem::exists(path)) {
      throw Error(ErrorCode::ConfigError, "field '" + field + "': path '" + path + "' does not exist");
    }
  }
}

std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::FormatError, "config line " + std::to_string(line_no) + ": expected key = value");
    }
    auto key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw Error(ErrorCode::FormatError, "config line " + std::to_string(line_no) + ": empty key");
    out.emplace_back(std::move(key), trim(std::string_view(t).substr(eq + 1)));
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace pmatch
