#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "emdm/engine.hpp"

namespace emdm::detail {

// Evaluation-time value. Text points into the database or into the formula,
// both of which outlive an evaluation.
struct V {
    enum Kind : std::uint8_t { Null, Int, Text, RowRef, DateV, Bool };
    Kind kind = Null;
    std::int64_t a = 0;  // Int value, row x, year, or Truth
    std::int64_t b = 0;  // row table, or month
    std::int64_t c = 0;  // day
    const std::string* s = nullptr;
};

class Evaluator {
public:
    Evaluator(const Database& db, std::int64_t year, const Database* prior = nullptr)
        : db_(&db), cur_(&db), prior_(prior), year_(year) {}

    std::vector<std::int64_t> slots;

    V eval(const ir::Node& n);
    Truth truth(const ir::Node& n);

    // The constraint body under the current outer bindings. For temporal
    // constraints with a prior state, the antecedent of the body's
    // implication reads the prior state and the consequent the new one.
    Truth body(const CompiledConstraint& c);

    // Calls fn(truth) for every assignment of the outer slots, with slots in
    // `fixed` (slot -> x) held constant. Stops early when fn returns false.
    template <class F>
    void for_each_binding(const CompiledConstraint& c, const std::vector<std::optional<std::int64_t>>& fixed, F&& fn) {
        slots.assign(static_cast<std::size_t>(c.slot_count), 0);
        bool go = true;
        enumerate(c, 0, fixed, fn, go);
    }

private:
    template <class F>
    void enumerate(const CompiledConstraint& c, std::size_t i, const std::vector<std::optional<std::int64_t>>& fixed,
                   F& fn, bool& go) {
        if (!go) return;
        if (i == c.outer_slots.size()) {
            go = fn(body(c));
            return;
        }
        const int slot = c.outer_slots[i];
        const int table = c.slot_tables[static_cast<std::size_t>(slot)];
        if (fixed.size() > static_cast<std::size_t>(slot) && fixed[static_cast<std::size_t>(slot)]) {
            const std::int64_t x = *fixed[static_cast<std::size_t>(slot)];
            if (!db_->find(table, x)) return;
            slots[static_cast<std::size_t>(slot)] = x;
            enumerate(c, i + 1, fixed, fn, go);
            return;
        }
        for (const auto& entry : db_->rows(table)) {
            slots[static_cast<std::size_t>(slot)] = entry.first;
            enumerate(c, i + 1, fixed, fn, go);
            if (!go) return;
        }
    }

    Truth quantify(const ir::Node& n, std::size_t i, bool forall);
    V column(const ir::Node& n);
    Truth compare(const ir::Node& n);

    const Database* db_;
    const Database* cur_;
    const Database* prior_;
    std::int64_t year_;
};

V to_v(const Value& v, const ColumnDef& col);
DerivedValue to_derived(const V& v);

}  // namespace emdm::detail
