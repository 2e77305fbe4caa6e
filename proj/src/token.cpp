#include "pmatch/token.hpp"

#include "pmatch/rng.hpp"

namespace pmatch {

std::size_t TokenHash::operator()(const Token& t) const noexcept {
  std::uint64_t h = fnv1a64(t.surface);
  h ^= static_cast<std::uint64_t>(t.kind) << 8 | static_cast<std::uint64_t>(t.font);
  return static_cast<std::size_t>(mix64(h));
}

std::string_view font_tag(Font font) {
  switch (font) {
    case Font::Normal: return "";
    case Font::Bold: return "bold";
    case Font::Italic: return "italic";
    case Font::Script: return "script";
    case Font::Fraktur: return "fraktur";
    case Font::DoubleStruck: return "dstruck";
    case Font::Other: return "other";
  }
  return "";
}

std::optional<Font> font_from_tag(std::string_view tag) {
  if (tag.empty() || tag == "normal") return Font::Normal;
  if (tag == "bold") return Font::Bold;
  if (tag == "italic") return Font::Italic;
  if (tag == "script") return Font::Script;
  if (tag == "fraktur") return Font::Fraktur;
  if (tag == "dstruck") return Font::DoubleStruck;
  if (tag == "other") return Font::Other;
  return std::nullopt;
}

Font font_from_mathvariant(std::string_view variant) {
  if (variant == "normal") return Font::Normal;
  if (variant == "bold") return Font::Bold;
  if (variant == "italic") return Font::Italic;
  if (variant == "script" || variant == "bold-script") return Font::Script;
  if (variant == "fraktur" || variant == "bold-fraktur") return Font::Fraktur;
  if (variant == "double-struck") return Font::DoubleStruck;
  return Font::Other;
}

bool valid_surface(std::string_view surface) {
  if (surface.empty()) return false;
  for (char c : surface) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') return false;
  }
  return true;
}

std::string to_display(const Token& token) {
  if (token.kind == TokenKind::Text) return "\"" + token.surface + "\"";
  std::string out = token.surface;
  if (token.font != Font::Normal) {
    out += '#';
    out += font_tag(token.font);
  }
  return out;
}

std::string to_display(const TokenList& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += to_display(t);
  }
  return out;
}

}  // namespace pmatch
