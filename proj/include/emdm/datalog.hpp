#pragma once

// Positive Datalog over the stored tables, plus the ancestor/descendant
// queries built on it.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "emdm/database.hpp"

namespace emdm {

// References and surrogates both appear as their integer x.
using DValue = std::variant<std::monostate, std::int64_t, std::string>;
using Tuple = std::vector<DValue>;
using Relation = std::set<Tuple>;

struct FixpointStats {
    int rounds = 0;           // delta rounds after the initial one
    std::size_t derived = 0;  // tuples added across all derived predicates
};

// Least fixpoint of the rules by semi-naive iteration. Table atoms read the
// live rows: positional arguments follow the table's column order (x first),
// named arguments address a column; a NULL matches nothing.
std::map<std::string, Relation> evaluate_program(const std::vector<DatalogRule>& rules, const Database& db,
                                                 FixpointStats* stats = nullptr);

// The schema's rules for `head` and every derived predicate they depend on.
std::vector<DatalogRule> rules_for(const std::vector<DatalogRule>& rules, std::string_view head);

// Ancestor rules over the table's parent columns, used when the schema
// carries no TransClosure program of its own.
std::vector<DatalogRule> closure_program(const CompiledSchema& schema, std::string_view table,
                                         std::string_view head = "TransClosure");

// Self-map columns the closure follows: those of the table's acyclicity
// constraint, or every self-reference when none is declared.
std::vector<int> parent_columns(const CompiledSchema& schema, int table);

struct ClosurePair {
    std::int64_t ancestor = 0;
    std::int64_t descendant = 0;
    auto operator<=>(const ClosurePair&) const = default;
};

// All (ancestor, descendant) pairs, sorted by sort_closure_pairs.
std::vector<ClosurePair> transitive_closure(const Database& db, std::string_view table = "PERSONS",
                                            FixpointStats* stats = nullptr);

// Ancestor name, ancestor birth year, descendant birth year, descendant
// name, then ids. Unknown years sort last; names compare case-folded.
void sort_closure_pairs(std::vector<ClosurePair>& pairs, const Database& db, std::string_view table = "PERSONS");

struct GenerationEntry {
    std::int64_t person = 0;
    int generation = 0;  // negative for ancestors, positive for descendants
    std::string label;
    bool operator==(const GenerationEntry&) const = default;
};

std::string generation_label(int generation);

// The seed, its ancestors and its descendants, each at its minimal distance.
// Sorted by generation, birth year (unknown last), name, x. Throws NotFound.
std::vector<GenerationEntry> seeded_closure(const Database& db, std::int64_t seed, std::string_view table = "PERSONS");

}  // namespace emdm
