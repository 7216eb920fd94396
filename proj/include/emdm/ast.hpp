#pragma once

// Object model of a parsed (E)MDM schema: sets, typed functions, derived
// functions, constraints, and Datalog rules. Everything here is immutable once
// the parser hands it out, so documents can be shared freely across threads.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace emdm {

struct SourceSpan {
    int line = 1;    // 1-based
    int column = 1;  // 1-based, counted in code points
    int length = 0;
};

// ---------------------------------------------------------------------------
// Value domains

struct CurrentYearBound {
    bool operator==(const CurrentYearBound&) const = default;
};
using Bound = std::variant<std::int64_t, CurrentYearBound>;

struct NaturalBits {
    int bits = 16;
    bool operator==(const NaturalBits&) const = default;
};
struct IntRange {
    Bound lo;
    Bound hi;
    bool operator==(const IntRange&) const = default;
};
struct UnicodeText {
    int max_len = 1;
    bool operator==(const UnicodeText&) const = default;
};
struct EnumChars {
    std::vector<std::string> values;
    bool operator==(const EnumChars&) const = default;
};

using ValueDomain = std::variant<NaturalBits, IntRange, UnicodeText, EnumChars>;

bool is_text_domain(const ValueDomain& d);

// ---------------------------------------------------------------------------
// Formulas

enum class ExprKind {
    Forall,
    Exists,
    Implies,
    And,
    Or,
    Not,
    Compare,
    Arith,
    Apply,
    Var,
    IntLit,
    StrLit,
    IsNullCoalesce,
    InNulls,
    NotInNulls,
    InSet,
    CurrentYear,
};

enum class CompareOp { Eq, Ne, Lt, Le, Gt, Ge };
enum class ArithOp { Add, Sub };

using Literal = std::variant<std::int64_t, std::string>;

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    ExprKind kind = ExprKind::IntLit;
    SourceSpan span;
    CompareOp cmp = CompareOp::Eq;
    ArithOp arith = ArithOp::Add;
    // Apply: function name. Var: variable name. Forall/Exists: quantified set.
    std::string name;
    // Forall/Exists: bound variables, in source order.
    std::vector<std::string> vars;
    std::int64_t int_value = 0;
    std::string str_value;
    std::vector<Literal> literals;  // InSet
    std::vector<ExprPtr> operands;
    // Apply: the set the applied function is defined on, filled in by the
    // resolver (function names are only unique per domain).
    std::string domain;
};

bool structurally_equal(const Expr& a, const Expr& b);
bool structurally_equal(const ExprPtr& a, const ExprPtr& b);

// ---------------------------------------------------------------------------
// Declarations

struct SetDecl {
    std::string name;
    SourceSpan span;
};

struct SetRef {
    std::string set;
    bool operator==(const SetRef&) const = default;
};
using Codomain = std::variant<SetRef, ValueDomain>;

struct FunctionDecl {
    std::string name;
    std::string domain;
    Codomain codomain;
    bool nullable = false;  // "| NULLS"
    bool is_key = false;    // "<->"
    SourceSpan span;
};

// A computed function. One part is a scalar; three parts form a composite
// (year, month, day) date. The body refers to its argument as `x`.
struct DerivedFunction {
    std::string name;
    std::string domain;
    std::vector<ExprPtr> parts;
    SourceSpan span;

    bool is_date() const { return parts.size() == 3; }
};

struct InjectiveDecl {
    std::vector<std::string> functions;
};
struct AcyclicDecl {
    std::vector<std::string> functions;
};
struct ExistenceDecl {
    std::string if_known;
    std::string then_known;
};
struct FormulaDecl {
    ExprPtr formula;
    bool temporal = false;  // ALWAYS
};

using ConstraintBody = std::variant<InjectiveDecl, AcyclicDecl, ExistenceDecl, FormulaDecl>;

struct ConstraintDecl {
    std::string id;
    ConstraintBody body;
    SourceSpan span;
};

// ---------------------------------------------------------------------------
// Datalog

struct DatalogVar {
    std::string name;
};
using DatalogTerm = std::variant<DatalogVar, Literal>;

struct AtomArg {
    std::optional<std::string> field;  // named binding `Field=term`
    DatalogTerm term;
};

struct Atom {
    std::string predicate;
    std::vector<AtomArg> args;
    SourceSpan span;
};

struct DatalogRule {
    std::string head;
    std::vector<std::string> head_args;
    std::vector<Atom> body;
    SourceSpan span;
};

// ---------------------------------------------------------------------------

struct SchemaDoc {
    std::vector<SetDecl> sets;
    std::vector<FunctionDecl> functions;
    std::vector<DerivedFunction> derived;
    std::vector<ConstraintDecl> constraints;
    std::vector<DatalogRule> rules;
    std::string source_digest;

    const SetDecl* find_set(std::string_view name) const;
    const FunctionDecl* find_function(std::string_view domain, std::string_view name) const;
    const DerivedFunction* find_derived(std::string_view domain, std::string_view name) const;
    // Every set on which `name` names a stored or derived function.
    std::vector<std::string> domains_of(std::string_view name) const;
};

struct ElementCounts {
    int functions = 0;
    int explicit_constraints = 0;
    int rules = 0;
    bool operator==(const ElementCounts&) const = default;
};

ElementCounts count_elements(const SchemaDoc& doc);

// Equality up to source spans and digest.
bool structurally_equal(const SchemaDoc& a, const SchemaDoc& b);
bool structurally_equal(const ConstraintDecl& a, const ConstraintDecl& b, bool compare_ids = true);

// 64-bit FNV-1a of the text, rendered as 16 hex digits.
std::string digest_text(std::string_view text);

}  // namespace emdm
