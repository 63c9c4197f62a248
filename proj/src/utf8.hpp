#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace lmeval::utf8 {

// Decodes UTF-8 into scalar values. Malformed sequences decode to U+FFFD.
std::u32string decode(std::string_view bytes);
void append(std::string& out, char32_t cp);
std::string encode(char32_t cp);

bool is_space(char32_t cp) noexcept;
bool is_punct(char32_t cp) noexcept;
bool is_upper(char32_t cp) noexcept;

}  // namespace lmeval::utf8
