// token.hpp - typed lexical units shared by the corpus, symbol and encoder modules.
#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pmatch {

enum class TokenKind : std::uint8_t { Text = 0, Math = 1 };

enum class Font : std::uint8_t {
  Normal = 0,
  Bold,
  Italic,
  Script,
  Fraktur,
  DoubleStruck,
  Other,
};

/// A math token and a text token with the same surface are different tokens,
/// and so are two math tokens in different fonts.
struct Token {
  TokenKind kind = TokenKind::Text;
  std::string surface;
  Font font = Font::Normal;

  static Token text(std::string surface) { return {TokenKind::Text, std::move(surface), Font::Normal}; }
  static Token math(std::string surface, Font font = Font::Normal) {
    return {TokenKind::Math, std::move(surface), font};
  }

  bool is_math() const noexcept { return kind == TokenKind::Math; }

  friend auto operator<=>(const Token&, const Token&) = default;
  friend bool operator==(const Token&, const Token&) = default;
};

using TokenList = std::vector<Token>;

struct TokenHash {
  std::size_t operator()(const Token& t) const noexcept;
};

/// Corpus-file font tags (`bold`, `dstruck`, ...). Normal has no tag.
std::string_view font_tag(Font font);
std::optional<Font> font_from_tag(std::string_view tag);

/// Font for a MathML `mathvariant` value; unknown variants map to Other.
Font font_from_mathvariant(std::string_view variant);

/// True when `surface` is non-empty and has no whitespace.
bool valid_surface(std::string_view surface);

/// Human-readable rendering, e.g. `x`, `x#bold`, `"is"`.
std::string to_display(const Token& token);
std::string to_display(const TokenList& tokens);

}  // namespace pmatch
