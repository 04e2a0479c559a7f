#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace tracelam {

// Interned identifier. Equal names always intern to the same id within a
// process, so symbol comparison is integer comparison.
using Symbol = std::uint32_t;

Symbol intern(std::string_view name);
const std::string& symbol_name(Symbol sym);

// Fresh names for runtime alpha-renaming. The "%r" prefix is rejected by the
// surface parser, so these never collide with user identifiers.
Symbol fresh_runtime_name();

}  // namespace tracelam
