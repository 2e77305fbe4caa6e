#include "pmatch/mathml.hpp"

#include <array>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <sstream>
#include <string>

#include "pmatch/error.hpp"

namespace pmatch {
namespace {

namespace pt = boost::property_tree;

constexpr std::array kContentElements = {"apply", "ci", "cn", "csymbol", "bind", "bvar"};

bool is_content_element(const std::string& name) {
  for (const char* c : kContentElements) {
    if (name == c) return true;
  }
  return false;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

void emit_words(const std::string& text, TokenKind kind, Font font, TokenList& out) {
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) {
      out.push_back(kind == TokenKind::Text ? Token::text(text.substr(i, j - i))
                                            : Token::math(text.substr(i, j - i), font));
    }
    i = j;
  }
}

void walk(const std::string& name, const pt::ptree& node, Font inherited, TokenList& out) {
  if (is_content_element(name)) throw Error(ErrorCode::MalformedXml, "content MathML element <" + name + ">");
  if (name == "mspace" || name == "annotation" || name == "annotation-xml") return;

  Font font = inherited;
  if (const auto attrs = node.get_child_optional("<xmlattr>")) {
    if (const auto variant = attrs->get_optional<std::string>("mathvariant")) font = font_from_mathvariant(*variant);
  }
  const TokenKind kind = name == "mtext" ? TokenKind::Text : TokenKind::Math;

  for (const auto& [child_name, child] : node) {
    if (child_name == "<xmlattr>" || child_name == "<xmlcomment>") continue;
    if (child_name == "<xmltext>") {
      emit_words(child.data(), kind, font, out);
      continue;
    }
    walk(child_name, child, font, out);
  }
}

}  // namespace

TokenList linearize_mathml(std::string_view fragment) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(fragment)};
    pt::read_xml(in, tree, pt::xml_parser::no_concat_text);
  } catch (const pt::xml_parser_error& e) {
    throw Error(ErrorCode::MalformedXml, e.message());
  }

  const pt::ptree* root = nullptr;
  for (const auto& [name, child] : tree) {
    if (name == "<xmlcomment>") continue;
    if (name != "math" || root != nullptr) {
      throw Error(ErrorCode::MalformedXml, "expected a single <math> root, found <" + name + ">");
    }
    root = &child;
  }
  if (root == nullptr) throw Error(ErrorCode::MalformedXml, "no <math> root");

  TokenList out;
  walk("math", *root, Font::Normal, out);
  return out;
}

}  // namespace pmatch
