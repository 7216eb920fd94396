#include "eval.hpp"

#include "emdm/errors.hpp"

#include <chrono>
#include <ctime>

namespace emdm {

Truth kleene_and(Truth a, Truth b) {
    if (a == Truth::False || b == Truth::False) return Truth::False;
    if (a == Truth::True && b == Truth::True) return Truth::True;
    return Truth::Unknown;
}

Truth kleene_or(Truth a, Truth b) {
    if (a == Truth::True || b == Truth::True) return Truth::True;
    if (a == Truth::False && b == Truth::False) return Truth::False;
    return Truth::Unknown;
}

Truth kleene_not(Truth a) {
    if (a == Truth::True) return Truth::False;
    if (a == Truth::False) return Truth::True;
    return Truth::Unknown;
}

Truth kleene_implies(Truth a, Truth b) { return kleene_or(kleene_not(a), b); }

const char* truth_name(Truth t) {
    switch (t) {
        case Truth::False: return "False";
        case Truth::Unknown: return "Unknown";
        case Truth::True: return "True";
    }
    return "?";
}

std::int64_t EvalContext::year() const {
    if (clock) return clock();
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    return tm.tm_year + 1900;
}

EvalContext EvalContext::fixed_year(std::int64_t year) {
    EvalContext ctx;
    ctx.clock = [year] { return year; };
    return ctx;
}

std::strong_ordering compare_dates(const Date& a, const Date& b) {
    if (auto c = a.year <=> b.year; c != 0) return c;
    if (auto c = a.month <=> b.month; c != 0) return c;
    return a.day <=> b.day;
}

std::string derived_to_string(const DerivedValue& v) {
    if (std::holds_alternative<std::monostate>(v)) return "NULL";
    if (auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
    if (auto* s = std::get_if<std::string>(&v)) return *s;
    const auto& d = std::get<Date>(v);
    return std::to_string(d.year) + "-" + std::to_string(d.month) + "-" + std::to_string(d.day);
}

namespace detail {

namespace {

V boolean(Truth t) {
    V v;
    v.kind = V::Bool;
    v.a = static_cast<std::int64_t>(t);
    return v;
}

V integer(std::int64_t i) {
    V v;
    v.kind = V::Int;
    v.a = i;
    return v;
}

template <class T>
bool ordered(CompareOp op, const T& a, const T& b) {
    switch (op) {
        case CompareOp::Eq: return a == b;
        case CompareOp::Ne: return a != b;
        case CompareOp::Lt: return a < b;
        case CompareOp::Le: return a <= b;
        case CompareOp::Gt: return a > b;
        case CompareOp::Ge: return a >= b;
    }
    return false;
}

Truth from_bool(bool b) { return b ? Truth::True : Truth::False; }

}  // namespace

V to_v(const Value& value, const ColumnDef& col) {
    V v;
    if (is_null(value)) return v;
    if (auto* i = std::get_if<std::int64_t>(&value)) return integer(*i);
    if (auto* s = std::get_if<std::string>(&value)) {
        v.kind = V::Text;
        v.s = s;
        return v;
    }
    v.kind = V::RowRef;
    v.a = std::get<Ref>(value).x;
    v.b = col.ref_table;
    return v;
}

DerivedValue to_derived(const V& v) {
    switch (v.kind) {
        case V::Int: return v.a;
        case V::Text: return *v.s;
        case V::DateV: return Date{v.a, v.b, v.c};
        default: return std::monostate{};
    }
}

V Evaluator::column(const ir::Node& n) {
    const V arg = eval(*n.kids[0]);
    if (arg.kind != V::RowRef) return V{};
    const Row* row = cur_->find(n.table, arg.a);
    if (!row) return V{};
    const auto& def = cur_->schema().tables[static_cast<std::size_t>(n.table)];
    return to_v(row->values[static_cast<std::size_t>(n.column)], def.columns[static_cast<std::size_t>(n.column)]);
}

Truth Evaluator::compare(const ir::Node& n) {
    const V a = eval(*n.kids[0]);
    if (a.kind == V::Null) return Truth::Unknown;
    const V b = eval(*n.kids[1]);
    if (b.kind == V::Null || a.kind != b.kind) return Truth::Unknown;
    switch (a.kind) {
        case V::Int: return from_bool(ordered(n.cmp, a.a, b.a));
        case V::Text: return from_bool(ordered(n.cmp, *a.s, *b.s));
        case V::RowRef: return from_bool(ordered(n.cmp, a.a, b.a));
        case V::DateV: {
            const auto c = compare_dates(Date{a.a, a.b, a.c}, Date{b.a, b.b, b.c});
            const int sign = c < 0 ? -1 : c > 0 ? 1 : 0;
            return from_bool(ordered(n.cmp, sign, 0));
        }
        default: return Truth::Unknown;
    }
}

Truth Evaluator::quantify(const ir::Node& n, std::size_t i, bool forall) {
    if (i == n.slots.size()) return truth(*n.kids[0]);
    Truth acc = forall ? Truth::True : Truth::False;
    for (const auto& entry : cur_->rows(n.table)) {
        slots[static_cast<std::size_t>(n.slots[i])] = entry.first;
        const Truth t = quantify(n, i + 1, forall);
        if (forall && t == Truth::False) return Truth::False;
        if (!forall && t == Truth::True) return Truth::True;
        if (t == Truth::Unknown) acc = Truth::Unknown;
    }
    return acc;
}

Truth Evaluator::truth(const ir::Node& n) {
    const V v = eval(n);
    return v.kind == V::Bool ? static_cast<Truth>(v.a) : Truth::Unknown;
}

V Evaluator::eval(const ir::Node& n) {
    using ir::Op;
    switch (n.op) {
        case Op::Forall: return boolean(quantify(n, 0, true));
        case Op::Exists: return boolean(quantify(n, 0, false));
        case Op::Implies: {
            const Truth a = truth(*n.kids[0]);
            if (a == Truth::False) return boolean(Truth::True);
            return boolean(kleene_implies(a, truth(*n.kids[1])));
        }
        case Op::And: {
            const Truth a = truth(*n.kids[0]);
            if (a == Truth::False) return boolean(Truth::False);
            return boolean(kleene_and(a, truth(*n.kids[1])));
        }
        case Op::Or: {
            const Truth a = truth(*n.kids[0]);
            if (a == Truth::True) return boolean(Truth::True);
            return boolean(kleene_or(a, truth(*n.kids[1])));
        }
        case Op::Not: return boolean(kleene_not(truth(*n.kids[0])));
        case Op::Compare: return boolean(compare(n));
        case Op::Arith: {
            const V a = eval(*n.kids[0]);
            if (a.kind != V::Int) return V{};
            const V b = eval(*n.kids[1]);
            if (b.kind != V::Int) return V{};
            return integer(n.arith == ArithOp::Add ? a.a + b.a : a.a - b.a);
        }
        case Op::Column: return column(n);
        case Op::Var: {
            V v;
            v.kind = V::RowRef;
            v.a = slots[static_cast<std::size_t>(n.slot)];
            v.b = n.table;
            return v;
        }
        case Op::Int: return integer(n.ival);
        case Op::Str: {
            V v;
            v.kind = V::Text;
            v.s = &n.sval;
            return v;
        }
        case Op::Coalesce: {
            const V a = eval(*n.kids[0]);
            return a.kind == V::Null ? eval(*n.kids[1]) : a;
        }
        case Op::IsNull: return boolean(from_bool(eval(*n.kids[0]).kind == V::Null));
        case Op::NotNull: return boolean(from_bool(eval(*n.kids[0]).kind != V::Null));
        case Op::InSet: {
            const V a = eval(*n.kids[0]);
            if (a.kind == V::Null) return boolean(Truth::Unknown);
            for (const auto& lit : n.literals) {
                if (a.kind == V::Int) {
                    if (auto* i = std::get_if<std::int64_t>(&lit); i && *i == a.a) return boolean(Truth::True);
                } else if (a.kind == V::Text) {
                    if (auto* s = std::get_if<std::string>(&lit); s && *s == *a.s) return boolean(Truth::True);
                }
            }
            return boolean(Truth::False);
        }
        case Op::CurrentYear: return integer(year_);
        case Op::Date: {
            V parts[3];
            for (int i = 0; i < 3; ++i) {
                parts[i] = eval(*n.kids[static_cast<std::size_t>(i)]);
                if (parts[i].kind != V::Int) return V{};
            }
            V v;
            v.kind = V::DateV;
            v.a = parts[0].a;
            v.b = parts[1].a;
            v.c = parts[2].a;
            return v;
        }
    }
    return V{};
}

Truth Evaluator::body(const CompiledConstraint& c) {
    if (c.temporal && prior_ && c.body->op == ir::Op::Implies) {
        cur_ = prior_;
        const Truth ante = truth(*c.body->kids[0]);
        cur_ = db_;
        if (ante == Truth::False) return Truth::True;
        return kleene_implies(ante, truth(*c.body->kids[1]));
    }
    return truth(*c.body);
}

}  // namespace detail

Truth eval_formula(const CompiledConstraint& c, const Database& db, const EvalContext& ctx, const Database* prior) {
    if (!c.formula) return Truth::True;
    detail::Evaluator ev(db, ctx.year(), prior);
    Truth acc = Truth::True;
    ev.for_each_binding(c, {}, [&](Truth t) {
        if (t == Truth::False) {
            acc = Truth::False;
            return false;
        }
        if (t == Truth::Unknown) acc = Truth::Unknown;
        return true;
    });
    return acc;
}

std::map<std::string, DerivedValue> compute_derived(const Database& db, int table, std::int64_t x,
                                                    const EvalContext& ctx) {
    if (!db.find(table, x)) throw NotFound(db.schema().tables[static_cast<std::size_t>(table)].name + " has no x = " +
                                           std::to_string(x));
    std::map<std::string, DerivedValue> out;
    detail::Evaluator ev(db, ctx.year());
    ev.slots.assign(1, x);
    for (const auto& d : db.schema().tables[static_cast<std::size_t>(table)].derived) {
        if (d.is_date()) {
            auto n = std::make_shared<ir::Node>();
            n->op = ir::Op::Date;
            n->kids = d.parts;
            out[d.name] = detail::to_derived(ev.eval(*n));
        } else {
            out[d.name] = detail::to_derived(ev.eval(*d.parts[0]));
        }
    }
    return out;
}

}  // namespace emdm
