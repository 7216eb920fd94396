#include "lexer.hpp"

#include <array>
#include <charconv>

namespace emdm::detail {

namespace {

constexpr std::array<std::string_view, 17> kKeywords = {
    "SET",    "NAT",    "UNICODE", "NULLS", "INJECTIVE", "ACYCLIC", "EXISTENCE", "ALWAYS",     "CONSTRAINT",
    "forall", "exists", "in",      "and",   "or",        "not",     "isNull",    "CurrentYear",
};

// Longest symbols first so that maximal munch falls out of a linear scan.
constexpr std::array<std::string_view, 25> kSymbols = {
    "<->", "<-", "<>", "<=", "->", "|-", ":=", "=>", "!=", ">=", ":", "|", "*",
    ",",   "(",  ")",  "{",  "}",  "[",  "]",  "=",  "<",  ">",  "+", "-",
};

bool ident_start(unsigned char c) { return c == '_' || (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c >= 0x80; }
bool ident_char(unsigned char c) { return ident_start(c) || (c >= '0' && c <= '9'); }

class Lexer {
public:
    Lexer(std::string_view text, std::vector<Diagnostic>& diags) : text_(text), diags_(diags) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        bool fresh_line = true;
        while (true) {
            skip_blank(fresh_line);
            if (pos_ >= text_.size()) break;
            Token t;
            t.line_start = fresh_line;
            fresh_line = false;
            t.span = SourceSpan{line_, column_, 0};
            const std::size_t start = pos_;
            const unsigned char c = static_cast<unsigned char>(text_[pos_]);
            if (ident_start(c)) {
                while (pos_ < text_.size() && ident_char(static_cast<unsigned char>(text_[pos_]))) advance();
                t.kind = TokKind::Ident;
                t.text = std::string(text_.substr(start, pos_ - start));
            } else if (c >= '0' && c <= '9') {
                while (pos_ < text_.size() && text_[pos_] >= '0' && text_[pos_] <= '9') advance();
                t.kind = TokKind::Int;
                t.text = std::string(text_.substr(start, pos_ - start));
                auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.value);
                if (ec != std::errc{}) error(t.span, "integer literal out of range: " + t.text);
            } else if (c == '"' || c == '\'') {
                if (!lex_string(t)) continue;
            } else if (!lex_symbol(t)) {
                error(t.span, "unexpected character '" + std::string(1, static_cast<char>(c)) + "'");
                advance();
                continue;
            }
            t.span.length = static_cast<int>(column_ - t.span.column);
            if (t.span.length <= 0) t.span.length = 1;
            out.push_back(std::move(t));
        }
        Token end;
        end.kind = TokKind::End;
        end.span = SourceSpan{line_, column_, 0};
        end.line_start = true;
        out.push_back(end);
        return out;
    }

private:
    void advance() {
        const unsigned char c = static_cast<unsigned char>(text_[pos_++]);
        if (c == '\n') {
            ++line_;
            column_ = 1;
        } else if ((c & 0xC0) != 0x80) {
            ++column_;
        }
    }

    void skip_blank(bool& fresh_line) {
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (c == '\n') {
                fresh_line = true;
                advance();
            } else if (c == ' ' || c == '\t' || c == '\r') {
                advance();
            } else if (c == '#') {
                while (pos_ < text_.size() && text_[pos_] != '\n') advance();
            } else {
                break;
            }
        }
    }

    bool lex_string(Token& t) {
        const char quote = text_[pos_];
        advance();
        std::string value;
        while (pos_ < text_.size() && text_[pos_] != quote) {
            if (text_[pos_] == '\n') break;
            if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) {
                advance();
                const char e = text_[pos_];
                value.push_back(e == 'n' ? '\n' : e == 't' ? '\t' : e);
                advance();
                continue;
            }
            value.push_back(text_[pos_]);
            advance();
        }
        if (pos_ >= text_.size() || text_[pos_] != quote) {
            error(t.span, "unterminated string literal");
            return false;
        }
        advance();
        t.kind = TokKind::String;
        t.text = std::move(value);
        return true;
    }

    bool lex_symbol(Token& t) {
        for (auto sym : kSymbols) {
            if (text_.substr(pos_, sym.size()) == sym) {
                for (std::size_t i = 0; i < sym.size(); ++i) advance();
                t.kind = TokKind::Symbol;
                t.text = std::string(sym);
                return true;
            }
        }
        return false;
    }

    void error(SourceSpan span, std::string message) {
        span.length = 1;
        diags_.push_back(Diagnostic{Severity::Error, "LexError", span, std::move(message)});
    }

    std::string_view text_;
    std::vector<Diagnostic>& diags_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int column_ = 1;
};

}  // namespace

bool is_keyword(std::string_view word) {
    for (auto k : kKeywords)
        if (k == word) return true;
    return false;
}

std::vector<Token> lex(std::string_view text, std::vector<Diagnostic>& diags) { return Lexer(text, diags).run(); }

}  // namespace emdm::detail
