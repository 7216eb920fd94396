#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emdm/ast.hpp"

namespace emdm {

enum class Severity { Error, Warning };

struct Diagnostic {
    Severity severity = Severity::Error;
    std::string code;  // LexError, SyntaxError, ResolveError, ...
    SourceSpan span;
    std::string message;
};

bool has_errors(const std::vector<Diagnostic>& diags);
std::string format_diagnostic(const Diagnostic& d, std::string_view file = {});

struct ParseResult {
    std::optional<SchemaDoc> doc;  // set iff there are no errors
    std::vector<Diagnostic> diagnostics;
};

struct FormulaResult {
    ExprPtr formula;  // set iff there are no errors
    std::vector<Diagnostic> diagnostics;
};

ParseResult parse_schema(std::string_view text);

// Parses one closed formula and type-checks it against `context`.
FormulaResult parse_formula(std::string_view text, const SchemaDoc& context);

std::string render_schema(const SchemaDoc& doc);
std::string render_formula(const Expr& e);
std::string render_domain(const ValueDomain& d);
std::string render_constraint(const ConstraintDecl& c);

}  // namespace emdm
