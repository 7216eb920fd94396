#include <algorithm>
#include <deque>
#include <unordered_map>
#include <unordered_set>

#include "emdm/engine.hpp"
#include "emdm/errors.hpp"
#include "eval.hpp"

namespace emdm {

namespace {

constexpr std::size_t kViolationsPerConstraint = 50;

const TableDef& table_def(const Database& db, int t) { return db.schema().tables[static_cast<std::size_t>(t)]; }

int require_table(const Database& db, const std::string& name) {
    const int t = db.schema().table_index(name);
    if (t < 0) throw UnknownTable("unknown table '" + name + "'");
    return t;
}

std::int64_t bound_value(const Bound& b, std::int64_t year) {
    if (auto* i = std::get_if<std::int64_t>(&b)) return *i;
    return year;
}

std::size_t code_points(const std::string& s) {
    std::size_t n = 0;
    for (unsigned char c : s)
        if ((c & 0xC0) != 0x80) ++n;
    return n;
}

void check_surrogate_domain(const TableDef& def, std::int64_t x) {
    const int bits = std::get<NaturalBits>(*def.columns[0].value).bits;
    const std::int64_t max = bits >= 63 ? INT64_MAX : (std::int64_t{1} << bits) - 1;
    if (x < 0 || x > max)
        throw DomainError(def.name + ".x = " + std::to_string(x) + " is outside NAT(" + std::to_string(bits) + ")");
}

Value coerce(const Value& in, const TableDef& def, const ColumnDef& col, std::int64_t year, bool draft) {
    const std::string where = def.name + "." + col.name;
    if (is_null(in)) {
        if (!col.nullable && !draft) throw DomainError(where + " is required");
        return in;
    }
    if (col.is_ref()) {
        if (auto* r = std::get_if<Ref>(&in)) return *r;
        if (auto* i = std::get_if<std::int64_t>(&in)) return Ref{*i};
        throw DomainError(where + " expects a reference, got \"" + value_to_string(in) + "\"");
    }
    const ValueDomain& dom = *col.value;
    if (is_text_domain(dom)) {
        const auto* s = std::get_if<std::string>(&in);
        if (!s) throw DomainError(where + " expects text, got " + value_to_string(in));
        if (auto* u = std::get_if<UnicodeText>(&dom); u && code_points(*s) > static_cast<std::size_t>(u->max_len))
            throw DomainError(where + " is longer than " + std::to_string(u->max_len) + " characters");
        if (auto* e = std::get_if<EnumChars>(&dom);
            e && std::find(e->values.begin(), e->values.end(), *s) == e->values.end())
            throw DomainError(where + " = \"" + *s + "\" is not one of " + render_domain(dom));
        return in;
    }
    const auto* i = std::get_if<std::int64_t>(&in);
    if (!i) throw DomainError(where + " expects an integer, got \"" + value_to_string(in) + "\"");
    if (auto* n = std::get_if<NaturalBits>(&dom)) {
        const std::int64_t max = n->bits >= 63 ? INT64_MAX : (std::int64_t{1} << n->bits) - 1;
        if (*i < 0 || *i > max) throw DomainError(where + " = " + std::to_string(*i) + " is outside " + render_domain(dom));
    } else if (auto* r = std::get_if<IntRange>(&dom)) {
        if (*i < bound_value(r->lo, year) || *i > bound_value(r->hi, year))
            throw DomainError(where + " = " + std::to_string(*i) + " is outside [" +
                              std::to_string(bound_value(r->lo, year)) + ", " +
                              std::to_string(bound_value(r->hi, year)) + "]");
    }
    return in;
}

int writable_column(const TableDef& def, const std::string& name) {
    if (name == "x") throw DomainError(def.name + ".x is assigned by the store and is read-only");
    const int col = def.column_index(name);
    if (col < 0) {
        if (def.derived_index(name) >= 0) throw DomainError(def.name + "." + name + " is derived and cannot be written");
        throw UnknownField(def.name + " has no field '" + name + "'");
    }
    return col;
}

// What a write changed: one row of one table.
struct Touch {
    enum Kind { Insert, Update, Delete } kind = Update;
    int table = -1;
    std::int64_t x = 0;
    std::set<int> columns;
};

std::string witness_text(const std::vector<Witness>& ws) {
    std::string out;
    for (std::size_t i = 0; i < ws.size(); ++i) out += (i ? ", " : "") + ws[i].table + " #" + std::to_string(ws[i].x);
    return out;
}

Violation make_violation(const CompiledConstraint& c, std::vector<Witness> ws) {
    Violation v;
    v.constraint_id = c.id;
    v.kind = kind_name(c.kind);
    v.message = c.id + " violated: " + c.display_text + " [" + witness_text(ws) + "]";
    v.witnesses = std::move(ws);
    return v;
}

// Key tuple of one row, encoded for hashing; nullopt when a component is NULL.
std::optional<std::string> key_tuple(const Database& db, int table, const UniqueKey& key, std::int64_t x,
                                     detail::Evaluator& ev) {
    const Row* row = db.find(table, x);
    if (!row) return std::nullopt;
    const TableDef& def = table_def(db, table);
    std::string out;
    auto add_int = [&](char tag, std::int64_t v) {
        out.push_back(tag);
        out.append(std::to_string(v));
        out.push_back('\x1f');
    };
    for (const auto& part : key.parts) {
        detail::V v;
        if (part.column >= 0) {
            v = detail::to_v(row->values[static_cast<std::size_t>(part.column)],
                             def.columns[static_cast<std::size_t>(part.column)]);
        } else {
            const DerivedDef& d = def.derived[static_cast<std::size_t>(part.derived)];
            ev.slots.assign(1, x);
            if (d.is_date()) {
                detail::V parts[3];
                for (int i = 0; i < 3; ++i) parts[i] = ev.eval(*d.parts[static_cast<std::size_t>(i)]);
                if (parts[0].kind != detail::V::Int || parts[1].kind != detail::V::Int || parts[2].kind != detail::V::Int)
                    return std::nullopt;
                v.kind = detail::V::DateV;
                v.a = parts[0].a;
                v.b = parts[1].a;
                v.c = parts[2].a;
            } else {
                v = ev.eval(*d.parts[0]);
            }
        }
        switch (v.kind) {
            case detail::V::Null: return std::nullopt;
            case detail::V::Int: add_int('i', v.a); break;
            case detail::V::RowRef: add_int('r', v.a); break;
            case detail::V::Text:
                out.push_back('s');
                out.append(std::to_string(v.s->size()));
                out.push_back(':');
                out.append(*v.s);
                break;
            case detail::V::DateV:
                add_int('d', v.a);
                add_int('m', v.b);
                add_int('y', v.c);
                break;
            case detail::V::Bool: return std::nullopt;
        }
    }
    return out;
}

// Collects violations of a formula constraint over the bindings produced by
// `fixed` (or all bindings when empty).
void formula_violations(const CompiledConstraint& c, const Database& db, const Database* prior, std::int64_t year,
                        const std::vector<std::optional<std::int64_t>>& fixed, std::set<std::vector<Witness>>& seen,
                        std::vector<Violation>& out, std::size_t cap) {
    detail::Evaluator ev(db, year, prior);
    const auto& schema = db.schema();
    std::size_t found = 0;
    ev.for_each_binding(c, fixed, [&](Truth t) {
        if (t != Truth::False) return true;
        std::vector<Witness> ws;
        for (int s : c.outer_slots)
            ws.push_back(Witness{schema.tables[static_cast<std::size_t>(c.slot_tables[static_cast<std::size_t>(s)])].name,
                                 ev.slots[static_cast<std::size_t>(s)]});
        if (seen.insert(ws).second) {
            out.push_back(make_violation(c, std::move(ws)));
            ++found;
        }
        return found < cap;
    });
}

// Rows of the slot's table whose hop chain ends at row x of the read table.
std::vector<std::int64_t> rows_reaching(const Database& db, const Read& read, int slot_table, std::int64_t x) {
    std::vector<std::int64_t> out;
    const auto& schema = db.schema();
    for (const auto& [bx, brow] : db.rows(slot_table)) {
        const Row* cur = &brow;
        int cur_table = slot_table;
        std::int64_t cur_x = bx;
        bool ok = true;
        for (const auto& hop : read.hops) {
            const auto& v = cur->values[static_cast<std::size_t>(hop.column)];
            const auto* ref = std::get_if<Ref>(&v);
            if (!ref) {
                ok = false;
                break;
            }
            cur_table = schema.tables[static_cast<std::size_t>(hop.table)]
                            .columns[static_cast<std::size_t>(hop.column)]
                            .ref_table;
            cur_x = ref->x;
            cur = db.find(cur_table, cur_x);
            if (!cur) {
                ok = false;
                break;
            }
        }
        if (ok && cur_table == read.column.table && cur_x == x) out.push_back(bx);
    }
    return out;
}

bool touches(const CompiledConstraint& c, const Touch& t) {
    for (int col : t.columns)
        if (c.reads_scope.count(ColumnRef{t.table, col})) return true;
    return false;
}

std::vector<Violation> foreign_key_violations(const Database& after, const Touch& t) {
    std::vector<Violation> out;
    const auto& schema = after.schema();
    const TableDef& def = schema.tables[static_cast<std::size_t>(t.table)];
    if (t.kind == Touch::Delete) {
        for (std::size_t u = 0; u < schema.tables.size(); ++u) {
            const TableDef& other = schema.tables[u];
            for (const auto& fk : other.foreign_keys) {
                if (fk.target != t.table) continue;
                for (const auto& [ux, urow] : after.rows(static_cast<int>(u))) {
                    const auto* ref = std::get_if<Ref>(&urow.values[static_cast<std::size_t>(fk.column)]);
                    if (!ref || ref->x != t.x) continue;
                    const std::string& col = other.columns[static_cast<std::size_t>(fk.column)].name;
                    Violation v;
                    v.constraint_id = "fk:" + other.name + "." + col;
                    v.kind = "Referenced";
                    v.witnesses = {Witness{def.name, t.x}, Witness{other.name, ux}};
                    v.message = def.name + " #" + std::to_string(t.x) + " is referenced by " + other.name + " #" +
                                std::to_string(ux) + " through " + col;
                    out.push_back(std::move(v));
                }
            }
        }
        return out;
    }
    const Row* row = after.find(t.table, t.x);
    for (const auto& fk : def.foreign_keys) {
        if (!t.columns.count(fk.column)) continue;
        const auto* ref = std::get_if<Ref>(&row->values[static_cast<std::size_t>(fk.column)]);
        if (!ref || after.find(fk.target, ref->x)) continue;
        const std::string& col = def.columns[static_cast<std::size_t>(fk.column)].name;
        const std::string& target = schema.tables[static_cast<std::size_t>(fk.target)].name;
        Violation v;
        v.constraint_id = "fk:" + def.name + "." + col;
        v.kind = "ForeignKey";
        v.witnesses = {Witness{def.name, t.x}};
        v.message = def.name + "." + col + " references missing " + target + " #" + std::to_string(ref->x);
        out.push_back(std::move(v));
    }
    return out;
}

}  // namespace

Row make_row(const Database& db, int table, const std::map<std::string, Value>& values, std::int64_t x,
             const EvalContext& ctx) {
    const TableDef& def = table_def(db, table);
    const std::int64_t year = ctx.year();
    Row row;
    row.values.assign(def.columns.size(), Value{});
    for (const auto& [name, value] : values) {
        const int col = writable_column(def, name);
        row.values[static_cast<std::size_t>(col)] = value;
    }
    for (std::size_t i = 1; i < def.columns.size(); ++i) row.values[i] = coerce(row.values[i], def, def.columns[i], year, ctx.draft);
    check_surrogate_domain(def, x);
    if (db.find(table, x)) throw DomainError(def.name + " already has x = " + std::to_string(x));
    row.values[0] = x;
    return row;
}

Database stage_write(const Database& db, const WriteOp& w, const EvalContext& ctx,
                     std::optional<std::int64_t>* assigned_x) {
    const std::int64_t year = ctx.year();
    Database after = db;
    std::visit(
        [&](const auto& op) {
            using T = std::decay_t<decltype(op)>;
            const int t = require_table(db, op.table);
            const TableDef& def = table_def(db, t);
            if constexpr (std::is_same_v<T, Insert>) {
                const std::int64_t x = op.x ? *op.x : db.next_id(t);
                after.mutable_rows(t).emplace(x, make_row(db, t, op.values, x, ctx));
                after.set_next_id(t, std::max(db.next_id(t), x + 1));
                if (assigned_x) *assigned_x = x;
            } else if constexpr (std::is_same_v<T, Update>) {
                const Row* existing = db.find(t, op.x);
                if (!existing) throw NotFound(def.name + " has no x = " + std::to_string(op.x));
                Row row = *existing;
                for (const auto& [name, value] : op.values) {
                    const int col = writable_column(def, name);
                    row.values[static_cast<std::size_t>(col)] =
                        coerce(value, def, def.columns[static_cast<std::size_t>(col)], year, ctx.draft);
                }
                after.mutable_rows(t)[op.x] = std::move(row);
            } else {
                if (!db.find(t, op.x)) throw NotFound(def.name + " has no x = " + std::to_string(op.x));
                after.mutable_rows(t).erase(op.x);
            }
        },
        w);
    return after;
}

std::optional<std::vector<std::int64_t>> detect_cycle(const Database& db, int table, const std::vector<int>& columns,
                                                      std::int64_t start, const EvalContext& ctx) {
    if (!db.find(table, start)) return std::nullopt;
    // Breadth-first from start's successors; reaching start closes a cycle.
    std::unordered_map<std::int64_t, std::int64_t> parent;
    std::deque<std::pair<std::int64_t, int>> queue;
    queue.emplace_back(start, 0);
    parent.emplace(start, start);
    while (!queue.empty()) {
        auto [node, depth] = queue.front();
        queue.pop_front();
        if (depth > ctx.recursion_limit)
            throw EvalError("cycle search exceeded the recursion limit of " + std::to_string(ctx.recursion_limit));
        const Row* row = db.find(table, node);
        if (!row) continue;
        for (int col : columns) {
            const auto* ref = std::get_if<Ref>(&row->values[static_cast<std::size_t>(col)]);
            if (!ref) continue;
            if (ref->x == start) {
                std::vector<std::int64_t> cycle;
                for (std::int64_t n = node; n != start; n = parent.at(n)) cycle.push_back(n);
                cycle.push_back(start);
                std::reverse(cycle.begin(), cycle.end());
                return cycle;
            }
            if (parent.emplace(ref->x, node).second) queue.emplace_back(ref->x, depth + 1);
        }
    }
    return std::nullopt;
}

std::optional<std::int64_t> check_unique(const Database& db, int table, const UniqueKey& key, std::int64_t x,
                                         const EvalContext& ctx) {
    detail::Evaluator ev(db, ctx.year());
    const auto mine = key_tuple(db, table, key, x, ev);
    if (!mine) return std::nullopt;
    for (const auto& entry : db.rows(table)) {
        if (entry.first == x) continue;
        if (key_tuple(db, table, key, entry.first, ev) == mine) return entry.first;
    }
    return std::nullopt;
}

CheckReport check_write(const Database& db, const WriteOp& w, const EvalContext& ctx, Database* tentative) {
    const std::int64_t year = ctx.year();
    EvalContext fixed = EvalContext::fixed_year(year);
    fixed.recursion_limit = ctx.recursion_limit;
    fixed.draft = ctx.draft;
    CheckReport report;
    std::optional<std::int64_t> assigned;
    Database after = stage_write(db, w, fixed, &assigned);
    report.assigned_x = assigned;

    Touch touch;
    std::visit(
        [&](const auto& op) {
            using T = std::decay_t<decltype(op)>;
            touch.table = db.schema().table_index(op.table);
            const TableDef& def = table_def(db, touch.table);
            if constexpr (std::is_same_v<T, Insert>) {
                touch.kind = Touch::Insert;
                touch.x = *assigned;
                for (std::size_t i = 0; i < def.columns.size(); ++i) touch.columns.insert(static_cast<int>(i));
            } else if constexpr (std::is_same_v<T, Update>) {
                touch.kind = Touch::Update;
                touch.x = op.x;
                const Row* before = db.find(touch.table, op.x);
                const Row* now = after.find(touch.table, op.x);
                for (std::size_t i = 1; i < def.columns.size(); ++i)
                    if (!(before->values[i] == now->values[i])) touch.columns.insert(static_cast<int>(i));
            } else {
                touch.kind = Touch::Delete;
                touch.x = op.x;
                for (std::size_t i = 0; i < def.columns.size(); ++i) touch.columns.insert(static_cast<int>(i));
            }
        },
        w);

    const auto& schema = db.schema();
    const std::string& tname = schema.tables[static_cast<std::size_t>(touch.table)].name;
    std::vector<Violation> violations = foreign_key_violations(after, touch);

    for (const auto& c : schema.constraints) {
        switch (c.kind) {
            case ConstraintKind::Uniqueness: {
                if (touch.kind == Touch::Delete || c.table != touch.table || !touches(c, touch)) break;
                const auto& key = schema.tables[static_cast<std::size_t>(c.table)]
                                      .unique_keys[static_cast<std::size_t>(c.unique_key)];
                if (auto other = check_unique(after, c.table, key, touch.x, fixed))
                    violations.push_back(make_violation(c, {Witness{tname, touch.x}, Witness{tname, *other}}));
                break;
            }
            case ConstraintKind::Acyclicity: {
                if (touch.kind == Touch::Delete || c.table != touch.table || !touches(c, touch)) break;
                if (auto cycle = detect_cycle(after, c.table, c.acyclic_columns, touch.x, fixed)) {
                    std::vector<Witness> ws;
                    for (auto x : *cycle) ws.push_back(Witness{tname, x});
                    violations.push_back(make_violation(c, std::move(ws)));
                }
                break;
            }
            case ConstraintKind::Existence: {
                if (touch.kind == Touch::Delete || c.table != touch.table || !touches(c, touch)) break;
                const Row* row = after.find(touch.table, touch.x);
                if (!is_null(row->values[static_cast<std::size_t>(c.if_column)]) &&
                    is_null(row->values[static_cast<std::size_t>(c.then_column)]))
                    violations.push_back(make_violation(c, {Witness{tname, touch.x}}));
                break;
            }
            default: {
                const bool scoped = touches(c, touch);
                const bool quantified =
                    c.inner_tables.count(touch.table) > 0 ||
                    std::find(c.slot_tables.begin(), c.slot_tables.end(), touch.table) != c.slot_tables.end();
                if (!scoped && !(touch.kind != Touch::Update && quantified)) break;
                bool full = c.temporal || c.outer_slots.empty() || (scoped && c.inner_reads);
                if (touch.kind == Touch::Delete) {
                    if (!c.inner_tables.count(touch.table)) break;
                    full = true;
                }
                if (touch.kind == Touch::Insert && c.inner_tables.count(touch.table)) full = true;

                std::set<std::vector<Witness>> seen;
                if (full) {
                    formula_violations(c, after, &db, year, {}, seen, violations, kViolationsPerConstraint);
                    break;
                }
                std::set<std::pair<int, std::int64_t>> anchors;
                if (touch.kind == Touch::Insert) {
                    for (int s : c.outer_slots)
                        if (c.slot_tables[static_cast<std::size_t>(s)] == touch.table) anchors.emplace(s, touch.x);
                }
                for (const auto& read : c.reads) {
                    if (read.column.table != touch.table || !touch.columns.count(read.column.column)) continue;
                    const int slot_table = c.slot_tables[static_cast<std::size_t>(read.slot)];
                    if (read.hops.empty()) {
                        if (slot_table == touch.table) anchors.emplace(read.slot, touch.x);
                    } else if (touch.kind == Touch::Update) {
                        for (auto b : rows_reaching(after, read, slot_table, touch.x)) anchors.emplace(read.slot, b);
                    }
                }
                for (const auto& [slot, x] : anchors) {
                    std::vector<std::optional<std::int64_t>> fixed_slots(static_cast<std::size_t>(c.slot_count));
                    fixed_slots[static_cast<std::size_t>(slot)] = x;
                    formula_violations(c, after, &db, year, fixed_slots, seen, violations, kViolationsPerConstraint);
                }
                break;
            }
        }
    }

    report.violations = std::move(violations);
    report.verdict = report.violations.empty() ? Verdict::Accept : Verdict::Reject;
    if (tentative) *tentative = report.accepted() ? std::move(after) : db;
    return report;
}

CheckReport check_all(const Database& db, const EvalContext& ctx, const CheckAllOptions& options) {
    const std::int64_t year = ctx.year();
    EvalContext fixed = EvalContext::fixed_year(year);
    fixed.recursion_limit = ctx.recursion_limit;
    fixed.draft = ctx.draft;
    const auto& schema = db.schema();
    CheckReport report;
    auto& out = report.violations;
    auto full = [&] { return out.size() >= options.cap; };

    // Dangling references.
    for (std::size_t t = 0; t < schema.tables.size() && !full(); ++t) {
        const TableDef& def = schema.tables[t];
        for (const auto& fk : def.foreign_keys) {
            const std::string id = "fk:" + def.name + "." + def.columns[static_cast<std::size_t>(fk.column)].name;
            if (options.only && !options.only->count(id)) continue;
            for (const auto& [x, row] : db.rows(static_cast<int>(t))) {
                const auto* ref = std::get_if<Ref>(&row.values[static_cast<std::size_t>(fk.column)]);
                if (!ref || db.find(fk.target, ref->x)) continue;
                Violation v;
                v.constraint_id = id;
                v.kind = "ForeignKey";
                v.witnesses = {Witness{def.name, x}};
                v.message = def.name + "." + def.columns[static_cast<std::size_t>(fk.column)].name +
                            " references missing " + schema.tables[static_cast<std::size_t>(fk.target)].name + " #" +
                            std::to_string(ref->x);
                out.push_back(std::move(v));
                if (full()) break;
            }
        }
    }

    for (const auto& c : schema.constraints) {
        if (full()) break;
        if (options.only && !options.only->count(c.id)) continue;
        const std::string tname =
            c.table >= 0 ? schema.tables[static_cast<std::size_t>(c.table)].name : std::string();
        switch (c.kind) {
            case ConstraintKind::Uniqueness: {
                const auto& key = schema.tables[static_cast<std::size_t>(c.table)]
                                      .unique_keys[static_cast<std::size_t>(c.unique_key)];
                detail::Evaluator ev(db, year);
                std::unordered_map<std::string, std::int64_t> first;
                for (const auto& entry : db.rows(c.table)) {
                    auto tuple = key_tuple(db, c.table, key, entry.first, ev);
                    if (!tuple) continue;
                    auto [it, fresh] = first.emplace(std::move(*tuple), entry.first);
                    if (!fresh) {
                        out.push_back(make_violation(c, {Witness{tname, it->second}, Witness{tname, entry.first}}));
                        if (full()) break;
                    }
                }
                break;
            }
            case ConstraintKind::Acyclicity: {
                // Iterative three-colour depth-first search over the union graph.
                std::unordered_map<std::int64_t, int> colour;  // 1 grey, 2 black
                for (const auto& entry : db.rows(c.table)) {
                    if (colour.count(entry.first) || full()) continue;
                    std::vector<std::pair<std::int64_t, std::size_t>> stack{{entry.first, 0}};
                    colour[entry.first] = 1;
                    while (!stack.empty()) {
                        if (static_cast<int>(stack.size()) > ctx.recursion_limit)
                            throw EvalError("cycle search exceeded the recursion limit of " +
                                            std::to_string(ctx.recursion_limit));
                        auto& [node, next] = stack.back();
                        const Row* row = db.find(c.table, node);
                        if (!row || next >= c.acyclic_columns.size()) {
                            colour[node] = 2;
                            stack.pop_back();
                            continue;
                        }
                        const int col = c.acyclic_columns[next++];
                        const auto* ref = std::get_if<Ref>(&row->values[static_cast<std::size_t>(col)]);
                        if (!ref || !db.find(c.table, ref->x)) continue;
                        auto it = colour.find(ref->x);
                        if (it == colour.end()) {
                            colour[ref->x] = 1;
                            stack.emplace_back(ref->x, 0);
                        } else if (it->second == 1) {
                            std::vector<Witness> ws;
                            bool on = false;
                            for (const auto& frame : stack) {
                                on = on || frame.first == ref->x;
                                if (on) ws.push_back(Witness{tname, frame.first});
                            }
                            out.push_back(make_violation(c, std::move(ws)));
                            if (full()) break;
                        }
                    }
                }
                break;
            }
            case ConstraintKind::Existence: {
                for (const auto& [x, row] : db.rows(c.table)) {
                    if (!is_null(row.values[static_cast<std::size_t>(c.if_column)]) &&
                        is_null(row.values[static_cast<std::size_t>(c.then_column)])) {
                        out.push_back(make_violation(c, {Witness{tname, x}}));
                        if (full()) break;
                    }
                }
                break;
            }
            default: {
                std::set<std::vector<Witness>> seen;
                formula_violations(c, db, options.prior, year, {}, seen, out,
                                   std::min(kViolationsPerConstraint, options.cap - out.size()));
                break;
            }
        }
    }
    report.verdict = out.empty() ? Verdict::Accept : Verdict::Reject;
    return report;
}

}  // namespace emdm
