#include "emdm/collate.hpp"

#include <locale.h>
#include <wctype.h>

#include <algorithm>

namespace emdm {

namespace {

locale_t utf8_locale() {
    static const locale_t loc = [] {
        for (const char* name : {"C.UTF-8", "C.utf8", "en_US.UTF-8"}) {
            if (locale_t l = newlocale(LC_CTYPE_MASK, name, static_cast<locale_t>(nullptr))) return l;
        }
        return static_cast<locale_t>(nullptr);
    }();
    return loc;
}

// Malformed sequences decode byte-by-byte as U+FFFD.
char32_t next_code_point(std::string_view s, std::size_t& i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    int len = b0 < 0x80 ? 1 : (b0 >> 5) == 0x6 ? 2 : (b0 >> 4) == 0xE ? 3 : (b0 >> 3) == 0x1E ? 4 : 0;
    if (len == 0 || i + static_cast<std::size_t>(len) > s.size()) {
        ++i;
        return 0xFFFD;
    }
    char32_t cp = len == 1 ? b0 : b0 & (0x7F >> len);
    for (int k = 1; k < len; ++k) {
        const auto b = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
        if ((b & 0xC0) != 0x80) {
            ++i;
            return 0xFFFD;
        }
        cp = (cp << 6) | (b & 0x3F);
    }
    i += static_cast<std::size_t>(len);
    return cp;
}

}  // namespace

std::u32string fold_case(std::string_view utf8) {
    const locale_t loc = utf8_locale();
    std::u32string out;
    out.reserve(utf8.size());
    for (std::size_t i = 0; i < utf8.size();) {
        char32_t cp = next_code_point(utf8, i);
        if (loc)
            cp = static_cast<char32_t>(towlower_l(static_cast<wint_t>(cp), loc));
        else if (cp >= 'A' && cp <= 'Z')
            cp += 'a' - 'A';
        out.push_back(cp);
    }
    return out;
}

int collate(std::string_view a, std::string_view b) {
    const auto fa = fold_case(a);
    const auto fb = fold_case(b);
    if (int c = fa.compare(fb); c != 0) return c < 0 ? -1 : 1;
    if (int c = a.compare(b); c != 0) return c < 0 ? -1 : 1;
    return 0;
}

bool contains_folded(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) return true;
    const auto h = fold_case(haystack);
    const auto n = fold_case(needle);
    return std::search(h.begin(), h.end(), n.begin(), n.end()) != h.end();
}

}  // namespace emdm
