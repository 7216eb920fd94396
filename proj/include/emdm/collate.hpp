#pragma once

// Case-insensitive text ordering: UTF-8 decoded to code points, each folded
// to lower case through the C library's UTF-8 locale, then compared by code
// point. Falls back to ASCII folding when no UTF-8 locale is installed.

#include <string>
#include <string_view>

namespace emdm {

std::u32string fold_case(std::string_view utf8);

// <0, 0, >0 like strcmp; ties on the folded form are broken by raw bytes so
// the order stays total.
int collate(std::string_view a, std::string_view b);

bool contains_folded(std::string_view haystack, std::string_view needle);

}  // namespace emdm
