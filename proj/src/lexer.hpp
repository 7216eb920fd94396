#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "emdm/parser.hpp"

namespace emdm::detail {

enum class TokKind { Ident, Int, String, Symbol, End };

struct Token {
    TokKind kind = TokKind::End;
    std::string text;  // identifier, symbol, or decoded string literal
    std::int64_t value = 0;
    SourceSpan span;
    bool line_start = false;  // first token on its line
};

std::vector<Token> lex(std::string_view text, std::vector<Diagnostic>& diags);

bool is_keyword(std::string_view word);

}  // namespace emdm::detail
