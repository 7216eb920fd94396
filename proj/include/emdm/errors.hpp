#pragma once

#include <stdexcept>
#include <string>

namespace emdm {

// Base of every exception thrown across the public API. `code()` is a short
// stable identifier that the CLI and the HTTP layer surface verbatim.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define EMDM_DEFINE_ERROR(Name)                                              \
    class Name : public Error {                                              \
    public:                                                                  \
        explicit Name(const std::string& message) : Error(#Name, message) {} \
    }

EMDM_DEFINE_ERROR(NotFound);
EMDM_DEFINE_ERROR(DomainError);
EMDM_DEFINE_ERROR(UnknownTable);
EMDM_DEFINE_ERROR(UnknownField);
EMDM_DEFINE_ERROR(EvalError);
EMDM_DEFINE_ERROR(FormatError);
EMDM_DEFINE_ERROR(IoError);
EMDM_DEFINE_ERROR(DigestMismatch);
EMDM_DEFINE_ERROR(CorruptSnapshot);
EMDM_DEFINE_ERROR(BindError);

#undef EMDM_DEFINE_ERROR

}  // namespace emdm
