// mathml.hpp - Presentation-MathML linearization.
#pragma once

#include <string_view>

#include "pmatch/token.hpp"

namespace pmatch {

/// Flattens a `<math>` fragment into tokens in document order of its leaves.
///
/// Leaf text of mi/mo/mn (and any other leaf element) becomes Math tokens,
/// with the font taken from the nearest `mathvariant` attribute. `mtext`
/// splits on whitespace into Text tokens and `mspace` emits nothing. Layout
/// elements (msup, mfrac, ...) contribute only their children. Content-MathML
/// (apply, ci, cn, ...) and unparseable input raise MalformedXml.
TokenList linearize_mathml(std::string_view fragment);

}  // namespace pmatch
