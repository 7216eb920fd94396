#pragma once

// Constraint evaluation in Kleene three-valued logic and write adjudication.
// Only a definitely false constraint rejects a write; Unknown accepts.

#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "emdm/database.hpp"

namespace emdm {

enum class Truth { False, Unknown, True };

Truth kleene_and(Truth a, Truth b);
Truth kleene_or(Truth a, Truth b);
Truth kleene_not(Truth a);
Truth kleene_implies(Truth a, Truth b);
const char* truth_name(Truth t);

struct EvalContext {
    std::function<std::int64_t()> clock;  // current year; the system clock when empty
    int recursion_limit = 10000;
    bool draft = false;  // dry runs: a missing required value reads as unknown instead of failing

    std::int64_t year() const;
    static EvalContext fixed_year(std::int64_t year);
};

struct Insert {
    std::string table;
    std::map<std::string, Value> values;
    std::optional<std::int64_t> x;  // explicit surrogate, used by imports
};
struct Update {
    std::string table;
    std::int64_t x = 0;
    std::map<std::string, Value> values;
};
struct Delete {
    std::string table;
    std::int64_t x = 0;
};
using WriteOp = std::variant<Insert, Update, Delete>;

struct Witness {
    std::string table;
    std::int64_t x = 0;
    auto operator<=>(const Witness&) const = default;
};

struct Violation {
    std::string constraint_id;
    std::vector<Witness> witnesses;
    std::string message;
    std::string kind;  // constraint kind, or "ForeignKey" / "Referenced"
};

enum class Verdict { Accept, Reject };

struct CheckReport {
    Verdict verdict = Verdict::Accept;
    std::vector<Violation> violations;
    std::optional<std::int64_t> assigned_x;  // inserts

    bool accepted() const { return verdict == Verdict::Accept; }
};

struct Date {
    std::int64_t year = 0;
    std::int64_t month = 0;
    std::int64_t day = 0;
    bool operator==(const Date&) const = default;
};

std::strong_ordering compare_dates(const Date& a, const Date& b);

using DerivedValue = std::variant<std::monostate, std::int64_t, std::string, Date>;

// Evaluates a compiled formula constraint over the whole database. `prior`
// supplies the pre-write state for temporal constraints.
Truth eval_formula(const CompiledConstraint& c, const Database& db, const EvalContext& ctx,
                   const Database* prior = nullptr);

// Validates a write against column domains and produces the tentative state.
// Throws UnknownTable, UnknownField, DomainError, NotFound.
Database stage_write(const Database& db, const WriteOp& w, const EvalContext& ctx,
                     std::optional<std::int64_t>* assigned_x = nullptr);

// The domain-checked row an insert at `x` would store; `db` is not changed.
Row make_row(const Database& db, int table, const std::map<std::string, Value>& values, std::int64_t x,
             const EvalContext& ctx);

// Incremental adjudication: evaluates only constraints the write can affect,
// anchored at the bindings that read the touched row.
CheckReport check_write(const Database& db, const WriteOp& w, const EvalContext& ctx,
                        Database* tentative = nullptr);

struct CheckAllOptions {
    const Database* prior = nullptr;
    std::size_t cap = std::numeric_limits<std::size_t>::max();
    std::optional<std::set<std::string>> only;  // constraint ids to evaluate
};

// Full re-check of every constraint and reference; the oracle for check_write.
CheckReport check_all(const Database& db, const EvalContext& ctx, const CheckAllOptions& options = {});

// Directed cycle through `start` over the union of the given self-map columns.
// Returns the cycle's rows starting at `start`. Throws EvalError past the
// context's recursion limit.
std::optional<std::vector<std::int64_t>> detect_cycle(const Database& db, int table, const std::vector<int>& columns,
                                                      std::int64_t start, const EvalContext& ctx);

// Another row with the same key tuple as `x`; tuples with a NULL are exempt.
std::optional<std::int64_t> check_unique(const Database& db, int table, const UniqueKey& key, std::int64_t x,
                                         const EvalContext& ctx);

std::map<std::string, DerivedValue> compute_derived(const Database& db, int table, std::int64_t x,
                                                    const EvalContext& ctx);

std::string derived_to_string(const DerivedValue& v);

}  // namespace emdm
