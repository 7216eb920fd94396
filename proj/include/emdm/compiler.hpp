#pragma once

// Relational image of a schema: one table per set with surrogate "x", foreign
// and unique keys, and every constraint lowered to an index-resolved tree the
// engine evaluates directly.

#include <compare>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "emdm/ast.hpp"
#include "emdm/parser.hpp"

namespace emdm {

namespace ir {

enum class Op {
    Forall,
    Exists,
    Implies,
    And,
    Or,
    Not,
    Compare,
    Arith,
    Column,  // kids[0] evaluates to a row of `table`; yields its `column`
    Var,     // the row bound to `slot`
    Int,
    Str,
    Coalesce,
    IsNull,
    NotNull,
    InSet,
    CurrentYear,
    Date,  // kids = year, month, day
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
    Op op = Op::Int;
    CompareOp cmp = CompareOp::Eq;
    ArithOp arith = ArithOp::Add;
    int table = -1;   // Column: table of the row; Var/Forall/Exists: quantified table
    int column = -1;  // Column
    int slot = -1;    // Var
    std::vector<int> slots;  // Forall/Exists: one slot per bound variable
    std::int64_t ival = 0;
    std::string sval;
    std::vector<Literal> literals;
    std::vector<NodePtr> kids;
};

}  // namespace ir

struct ColumnRef {
    int table = -1;
    int column = -1;
    auto operator<=>(const ColumnRef&) const = default;
};

struct ColumnDef {
    std::string name;
    std::optional<ValueDomain> value;  // set for value columns
    int ref_table = -1;                // set for references
    bool nullable = false;
    bool is_key = false;

    bool is_ref() const { return ref_table >= 0; }
};

struct ForeignKey {
    int column = -1;
    int target = -1;
};

// One component of a unique key: a stored column or a derived function.
struct KeyPart {
    int column = -1;
    int derived = -1;
};

struct UniqueKey {
    std::vector<KeyPart> parts;
    std::string constraint_id;
};

struct DerivedDef {
    std::string name;
    std::vector<ir::NodePtr> parts;  // the row is slot 0
    bool is_date() const { return parts.size() == 3; }
};

struct TableDef {
    std::string name;
    std::vector<ColumnDef> columns;  // columns[0] is the surrogate "x"
    std::vector<ForeignKey> foreign_keys;
    std::vector<UniqueKey> unique_keys;  // unique_keys[0] is the surrogate
    std::vector<DerivedDef> derived;
    bool declared_surrogate = false;

    int column_index(std::string_view name) const;
    int derived_index(std::string_view name) const;
};

enum class ConstraintKind { Uniqueness, Acyclicity, Existence, RowLocal, CrossRow, CrossTable, Temporal };

const char* kind_name(ConstraintKind k);

// A column read by a formula: start at the row bound to `slot`, follow the
// reference columns in `hops`, then read `column`.
struct Read {
    int slot = -1;
    std::vector<ColumnRef> hops;
    ColumnRef column;
};

struct CompiledConstraint {
    std::string id;
    ConstraintKind kind = ConstraintKind::RowLocal;
    bool implicit = false;  // surrogate/key uniqueness, not declared explicitly
    std::set<ColumnRef> reads_scope;
    std::set<int> scope_tables;
    bool symmetric = false;
    std::string display_text;

    // Uniqueness, Acyclicity, Existence
    int table = -1;
    int unique_key = -1;
    std::vector<int> acyclic_columns;
    int if_column = -1;
    int then_column = -1;

    // Formula kinds
    ir::NodePtr formula;
    int slot_count = 0;
    std::vector<int> slot_tables;
    std::vector<int> outer_slots;  // leading universally quantified variables
    ir::NodePtr body;              // formula below the outer prefix
    std::vector<Read> reads;       // reads rooted at outer slots
    bool inner_reads = false;      // some read is rooted below the outer prefix
    std::set<int> inner_tables;    // tables quantified below the outer prefix
    bool temporal = false;
};

struct SchemaStats {
    int tables = 0;
    int foreign_keys = 0;
    int unique_keys = 0;
    int compiled_constraints = 0;
    int datalog_rules = 0;
    bool operator==(const SchemaStats&) const = default;
};

struct CompiledSchema {
    std::shared_ptr<const SchemaDoc> doc;
    std::vector<TableDef> tables;
    std::vector<CompiledConstraint> constraints;
    std::vector<DatalogRule> rules;
    std::string digest;

    int table_index(std::string_view name) const;
    const TableDef& table(std::string_view name) const;  // throws UnknownTable
    const CompiledConstraint* find_constraint(std::string_view id) const;
};

struct CompileResult {
    std::shared_ptr<const CompiledSchema> schema;  // null iff errors
    std::vector<Diagnostic> diagnostics;
};

CompileResult compile(const SchemaDoc& doc);

// Parses and compiles; errors from either stage end up in diagnostics.
CompileResult compile_source(std::string_view text);

std::set<std::pair<std::string, std::string>> dependency_scope(const ConstraintDecl& c, const SchemaDoc& doc);

std::vector<Diagnostic> lint_meta_axioms(const SchemaDoc& doc);

SchemaStats schema_stats(const CompiledSchema& cs);

}  // namespace emdm
