#include "emdm/datalog.hpp"

#include <algorithm>
#include <deque>
#include <optional>
#include <unordered_map>
#include <unordered_set>

#include "emdm/collate.hpp"
#include "emdm/errors.hpp"

namespace emdm {

namespace {

struct TupleHash {
    std::size_t operator()(const Tuple& t) const {
        std::size_t h = 0xcbf29ce484222325ULL;
        for (const auto& v : t) h = (h ^ std::hash<DValue>{}(v)) * 0x100000001b3ULL;
        return h;
    }
};

using TupleSet = std::unordered_set<Tuple, TupleHash>;
using Index = std::unordered_map<DValue, std::vector<const Tuple*>>;

// A relation plus lazily built single-column indexes.
struct Rel {
    std::vector<Tuple> tuples;
    std::map<int, Index> indexes;

    const Index& index(int column) {
        auto it = indexes.find(column);
        if (it != indexes.end()) return it->second;
        Index& idx = indexes[column];
        for (const auto& t : tuples) {
            const DValue& v = t[static_cast<std::size_t>(column)];
            if (!std::holds_alternative<std::monostate>(v)) idx[v].push_back(&t);
        }
        return idx;
    }
};

DValue to_dvalue(const Value& v) {
    if (auto* i = std::get_if<std::int64_t>(&v)) return *i;
    if (auto* s = std::get_if<std::string>(&v)) return *s;
    if (auto* r = std::get_if<Ref>(&v)) return r->x;
    return std::monostate{};
}

DValue to_dvalue(const Literal& l) {
    if (auto* i = std::get_if<std::int64_t>(&l)) return *i;
    return std::get<std::string>(l);
}

// A term is either a variable id or a constant.
struct Term {
    int var = -1;
    DValue constant;
};

struct CAtom {
    std::string predicate;
    bool derived = false;
    std::vector<std::pair<int, Term>> args;  // (column, term)
};

struct CRule {
    std::string head;
    std::vector<int> head_vars;
    std::vector<CAtom> body;
    int var_count = 0;
};

class Program {
public:
    Program(const std::vector<DatalogRule>& rules, const Database& db) : db_(db) {
        for (const auto& r : rules) idb_.insert(r.head);
        for (const auto& r : rules) rules_.push_back(compile(r));
    }

    std::map<std::string, Relation> run(FixpointStats* stats) {
        std::map<std::string, TupleSet> total;
        for (const auto& p : idb_) total[p];

        // Round zero: every rule against empty derived relations.
        std::map<std::string, std::vector<Tuple>> fresh;
        for (const auto& r : rules_) derive(r, -1, total, fresh);
        std::map<std::string, Rel> delta = absorb(fresh, total);

        int rounds = 0;
        while (std::any_of(delta.begin(), delta.end(), [](const auto& d) { return !d.second.tuples.empty(); })) {
            ++rounds;
            full_.clear();
            for (const auto& [p, set] : total) full_[p].tuples.assign(set.begin(), set.end());
            delta_ = &delta;
            fresh.clear();
            for (const auto& r : rules_) {
                for (std::size_t i = 0; i < r.body.size(); ++i) {
                    if (r.body[i].derived && !delta[r.body[i].predicate].tuples.empty())
                        derive(r, static_cast<int>(i), total, fresh);
                }
            }
            delta = absorb(fresh, total);
        }

        std::map<std::string, Relation> out;
        std::size_t derived = 0;
        for (auto& [p, set] : total) {
            derived += set.size();
            out[p] = Relation(set.begin(), set.end());
        }
        if (stats) *stats = FixpointStats{rounds, derived};
        return out;
    }

private:
    CRule compile(const DatalogRule& r) {
        CRule c;
        c.head = r.head;
        std::map<std::string, int> vars;
        auto var_id = [&](const std::string& name) {
            auto [it, inserted] = vars.emplace(name, static_cast<int>(vars.size()));
            return it->second;
        };
        for (const auto& a : r.body) {
            CAtom atom;
            atom.predicate = a.predicate;
            atom.derived = idb_.count(a.predicate) > 0;
            const TableDef* table = atom.derived ? nullptr : &db_.schema().table(a.predicate);
            int position = 0;
            for (const auto& arg : a.args) {
                int column = position++;
                if (arg.field) {
                    if (*arg.field == "x") {
                        column = 0;
                    } else {
                        const auto& cols = table->columns;
                        auto it = std::find_if(cols.begin(), cols.end(),
                                               [&](const ColumnDef& cd) { return cd.name == *arg.field; });
                        if (it == cols.end()) throw UnknownField(a.predicate + " has no column " + *arg.field);
                        column = static_cast<int>(it - cols.begin());
                    }
                }
                Term t;
                if (auto* v = std::get_if<DatalogVar>(&arg.term))
                    t.var = var_id(v->name);
                else
                    t.constant = to_dvalue(std::get<Literal>(arg.term));
                atom.args.emplace_back(column, t);
            }
            c.body.push_back(std::move(atom));
        }
        for (const auto& h : r.head_args) c.head_vars.push_back(var_id(h));
        c.var_count = static_cast<int>(vars.size());
        return c;
    }

    Rel& table_rel(const std::string& name) {
        auto it = edb_.find(name);
        if (it != edb_.end()) return it->second;
        Rel& rel = edb_[name];
        const int t = db_.schema().table_index(name);
        for (const auto& [x, row] : db_.rows(t)) {
            Tuple tuple;
            tuple.reserve(row.values.size());
            for (const auto& v : row.values) tuple.push_back(to_dvalue(v));
            rel.tuples.push_back(std::move(tuple));
        }
        return rel;
    }

    Rel& source(const CAtom& a, bool use_delta) {
        if (!a.derived) return table_rel(a.predicate);
        if (use_delta) return (*delta_)[a.predicate];
        return full_[a.predicate];
    }

    // Evaluates one rule; `delta_at` picks the body atom read from the last
    // round's new tuples (-1: none, used in round zero).
    void derive(const CRule& r, int delta_at, const std::map<std::string, TupleSet>& total,
                std::map<std::string, std::vector<Tuple>>& fresh) {
        std::vector<std::optional<DValue>> binding(static_cast<std::size_t>(r.var_count));
        std::vector<bool> done(r.body.size(), false);
        std::vector<int> order;
        if (delta_at >= 0) {
            order.push_back(delta_at);
            done[static_cast<std::size_t>(delta_at)] = true;
        } else if (std::any_of(r.body.begin(), r.body.end(), [](const CAtom& a) { return a.derived; })) {
            return;  // derived relations are empty in round zero
        }
        std::vector<bool> bound(static_cast<std::size_t>(r.var_count), false);
        for (int i : order)
            for (const auto& [col, t] : r.body[static_cast<std::size_t>(i)].args)
                if (t.var >= 0) bound[static_cast<std::size_t>(t.var)] = true;
        while (order.size() < r.body.size()) {
            int best = -1, best_score = -1;
            for (std::size_t i = 0; i < r.body.size(); ++i) {
                if (done[i]) continue;
                int score = 0;
                for (const auto& [col, t] : r.body[i].args)
                    if (t.var < 0 || bound[static_cast<std::size_t>(t.var)]) ++score;
                if (score > best_score) best = static_cast<int>(i), best_score = score;
            }
            done[static_cast<std::size_t>(best)] = true;
            order.push_back(best);
            for (const auto& [col, t] : r.body[static_cast<std::size_t>(best)].args)
                if (t.var >= 0) bound[static_cast<std::size_t>(t.var)] = true;
        }
        const TupleSet& existing = total.at(r.head);
        auto& out = fresh[r.head];
        auto emit = [&] {
            Tuple t;
            t.reserve(r.head_vars.size());
            for (int v : r.head_vars) t.push_back(*binding[static_cast<std::size_t>(v)]);
            if (!existing.count(t)) out.push_back(std::move(t));
        };
        join(r, order, 0, delta_at, binding, emit);
    }

    template <class Emit>
    void join(const CRule& r, const std::vector<int>& order, std::size_t k, int delta_at,
              std::vector<std::optional<DValue>>& binding, Emit& emit) {
        if (k == order.size()) {
            emit();
            return;
        }
        const int ai = order[k];
        const CAtom& atom = r.body[static_cast<std::size_t>(ai)];
        Rel& rel = source(atom, ai == delta_at);

        // Probe an index on the first argument whose value is already known.
        const std::vector<const Tuple*>* candidates = nullptr;
        std::vector<const Tuple*> all;
        for (const auto& [col, t] : atom.args) {
            const DValue* key = t.var < 0 ? &t.constant
                                          : binding[static_cast<std::size_t>(t.var)]
                                                ? &*binding[static_cast<std::size_t>(t.var)]
                                                : nullptr;
            if (!key) continue;
            const Index& idx = rel.index(col);
            auto it = idx.find(*key);
            if (it == idx.end()) return;
            candidates = &it->second;
            break;
        }
        if (!candidates) {
            all.reserve(rel.tuples.size());
            for (const auto& t : rel.tuples) all.push_back(&t);
            candidates = &all;
        }

        std::vector<int> newly;
        for (const Tuple* tuple : *candidates) {
            bool ok = true;
            newly.clear();
            for (const auto& [col, t] : atom.args) {
                const DValue& v = (*tuple)[static_cast<std::size_t>(col)];
                if (std::holds_alternative<std::monostate>(v)) {
                    ok = false;
                    break;
                }
                if (t.var < 0) {
                    if (v != t.constant) ok = false;
                } else if (auto& b = binding[static_cast<std::size_t>(t.var)]) {
                    if (*b != v) ok = false;
                } else {
                    b = v;
                    newly.push_back(t.var);
                }
                if (!ok) break;
            }
            if (ok) join(r, order, k + 1, delta_at, binding, emit);
            for (int v : newly) binding[static_cast<std::size_t>(v)].reset();
        }
    }

    static std::map<std::string, Rel> absorb(std::map<std::string, std::vector<Tuple>>& fresh,
                                             std::map<std::string, TupleSet>& total) {
        std::map<std::string, Rel> delta;
        for (auto& [p, set] : total) {
            Rel& d = delta[p];
            for (auto& t : fresh[p])
                if (set.insert(t).second) d.tuples.push_back(std::move(t));
        }
        return delta;
    }

    const Database& db_;
    std::set<std::string> idb_;
    std::vector<CRule> rules_;
    std::map<std::string, Rel> edb_;
    std::map<std::string, Rel> full_;
    std::map<std::string, Rel>* delta_ = nullptr;
};

struct PersonKey {
    const std::string* name = nullptr;
    std::optional<std::int64_t> birth;
};

class PersonKeys {
public:
    PersonKeys(const Database& db, int table) : db_(db), table_(table) {
        const auto& t = db.schema().tables[static_cast<std::size_t>(table)];
        name_col_ = t.column_index("Name");
        birth_col_ = t.column_index("BirthYear");
    }

    PersonKey operator()(std::int64_t x) const {
        PersonKey k;
        const Row* row = db_.find(table_, x);
        if (!row) return k;
        if (name_col_ >= 0) k.name = std::get_if<std::string>(&row->values[static_cast<std::size_t>(name_col_)]);
        if (birth_col_ >= 0)
            if (auto* y = std::get_if<std::int64_t>(&row->values[static_cast<std::size_t>(birth_col_)])) k.birth = *y;
        return k;
    }

private:
    const Database& db_;
    int table_;
    int name_col_ = -1;
    int birth_col_ = -1;
};

// Unknown years after known ones.
int compare_years(const std::optional<std::int64_t>& a, const std::optional<std::int64_t>& b) {
    if (a && b) return *a < *b ? -1 : *a > *b ? 1 : 0;
    if (a) return -1;
    if (b) return 1;
    return 0;
}

int compare_names(const std::string* a, const std::string* b) {
    static const std::string empty;
    return collate(a ? *a : empty, b ? *b : empty);
}

}  // namespace

std::map<std::string, Relation> evaluate_program(const std::vector<DatalogRule>& rules, const Database& db,
                                                 FixpointStats* stats) {
    return Program(rules, db).run(stats);
}

std::vector<DatalogRule> rules_for(const std::vector<DatalogRule>& rules, std::string_view head) {
    std::set<std::string> heads;
    for (const auto& r : rules) heads.insert(r.head);
    std::set<std::string> needed;
    std::deque<std::string> queue{std::string(head)};
    while (!queue.empty()) {
        std::string p = queue.front();
        queue.pop_front();
        if (!heads.count(p) || !needed.insert(p).second) continue;
        for (const auto& r : rules)
            if (r.head == p)
                for (const auto& a : r.body) queue.push_back(a.predicate);
    }
    std::vector<DatalogRule> out;
    for (const auto& r : rules)
        if (needed.count(r.head)) out.push_back(r);
    return out;
}

std::vector<int> parent_columns(const CompiledSchema& schema, int table) {
    for (const auto& c : schema.constraints)
        if (c.kind == ConstraintKind::Acyclicity && c.table == table) return c.acyclic_columns;
    std::vector<int> cols;
    const auto& t = schema.tables[static_cast<std::size_t>(table)];
    for (std::size_t i = 1; i < t.columns.size(); ++i)
        if (t.columns[i].ref_table == table) cols.push_back(static_cast<int>(i));
    return cols;
}

std::vector<DatalogRule> closure_program(const CompiledSchema& schema, std::string_view table, std::string_view head) {
    const int t = schema.table_index(table);
    if (t < 0) throw UnknownTable("unknown table " + std::string(table));
    const auto& def = schema.tables[static_cast<std::size_t>(t)];
    auto var = [](const char* n) { return AtomArg{std::nullopt, DatalogVar{n}}; };
    auto named = [](const std::string& f, const char* n) { return AtomArg{f, DatalogVar{n}}; };
    std::vector<DatalogRule> rules;
    for (int col : parent_columns(schema, t)) {
        const std::string& parent = def.columns[static_cast<std::size_t>(col)].name;
        DatalogRule base;
        base.head = std::string(head);
        base.head_args = {"a", "d"};
        base.body.push_back(Atom{def.name, {named("x", "d"), named(parent, "a")}, {}});
        rules.push_back(base);
        DatalogRule step;
        step.head = std::string(head);
        step.head_args = {"a", "d"};
        step.body.push_back(Atom{std::string(head), {var("m"), var("d")}, {}});
        step.body.push_back(Atom{def.name, {named("x", "m"), named(parent, "a")}, {}});
        rules.push_back(step);
    }
    return rules;
}

std::vector<ClosurePair> transitive_closure(const Database& db, std::string_view table, FixpointStats* stats) {
    const CompiledSchema& schema = db.schema();
    std::vector<DatalogRule> program = rules_for(schema.rules, "TransClosure");
    if (program.empty()) program = closure_program(schema, table);
    const auto relations = evaluate_program(program, db, stats);
    std::vector<ClosurePair> pairs;
    auto it = relations.find("TransClosure");
    if (it != relations.end()) {
        pairs.reserve(it->second.size());
        for (const auto& t : it->second) {
            auto* a = std::get_if<std::int64_t>(&t[0]);
            auto* d = std::get_if<std::int64_t>(&t[1]);
            if (a && d) pairs.push_back({*a, *d});
        }
    }
    sort_closure_pairs(pairs, db, table);
    return pairs;
}

void sort_closure_pairs(std::vector<ClosurePair>& pairs, const Database& db, std::string_view table) {
    const int t = db.schema().table_index(table);
    if (t < 0) throw UnknownTable("unknown table " + std::string(table));
    const PersonKeys keys(db, t);
    // Folding is the expensive part, so fold each distinct name once.
    std::unordered_map<std::int64_t, std::pair<std::u32string, std::optional<std::int64_t>>> cache;
    auto key = [&](std::int64_t x) -> const std::pair<std::u32string, std::optional<std::int64_t>>& {
        auto it = cache.find(x);
        if (it != cache.end()) return it->second;
        const PersonKey k = keys(x);
        return cache.emplace(x, std::make_pair(fold_case(k.name ? *k.name : std::string()), k.birth)).first->second;
    };
    for (const auto& p : pairs) key(p.ancestor), key(p.descendant);
    auto raw_name = [&](std::int64_t x) {
        const PersonKey k = keys(x);
        return k.name;
    };
    auto names = [&](std::int64_t a, std::int64_t b) {
        const auto& fa = cache.at(a).first;
        const auto& fb = cache.at(b).first;
        if (int c = fa.compare(fb); c != 0) return c < 0 ? -1 : 1;
        const std::string* ra = raw_name(a);
        const std::string* rb = raw_name(b);
        if (ra && rb) {
            if (int c = ra->compare(*rb); c != 0) return c < 0 ? -1 : 1;
        }
        return 0;
    };
    std::stable_sort(pairs.begin(), pairs.end(), [&](const ClosurePair& l, const ClosurePair& r) {
        if (int c = names(l.ancestor, r.ancestor); c != 0) return c < 0;
        if (int c = compare_years(cache.at(l.ancestor).second, cache.at(r.ancestor).second); c != 0) return c < 0;
        if (int c = compare_years(cache.at(l.descendant).second, cache.at(r.descendant).second); c != 0) return c < 0;
        if (int c = names(l.descendant, r.descendant); c != 0) return c < 0;
        return l < r;
    });
}

std::string generation_label(int generation) {
    static const char* const up[] = {"self", "parent", "grandparent", "great-grandparent"};
    static const char* const down[] = {"self", "child", "grandchild", "great-grandchild"};
    const int n = generation < 0 ? -generation : generation;
    if (n > 3) return "";
    return generation < 0 ? up[n] : down[n];
}

std::vector<GenerationEntry> seeded_closure(const Database& db, std::int64_t seed, std::string_view table) {
    const CompiledSchema& schema = db.schema();
    const int t = schema.table_index(table);
    if (t < 0) throw UnknownTable("unknown table " + std::string(table));
    if (!db.find(t, seed)) throw NotFound(std::string(table) + " has no x = " + std::to_string(seed));
    const std::vector<int> parents = parent_columns(schema, t);

    std::unordered_map<std::int64_t, std::vector<std::int64_t>> children;
    for (const auto& [x, row] : db.rows(t))
        for (int c : parents)
            if (auto* r = std::get_if<Ref>(&row.values[static_cast<std::size_t>(c)])) children[r->x].push_back(x);

    std::unordered_map<std::int64_t, int> generation{{seed, 0}};
    // Breadth-first in each direction gives the minimal distance.
    auto walk = [&](int sign) {
        std::deque<std::int64_t> queue{seed};
        while (!queue.empty()) {
            const std::int64_t x = queue.front();
            queue.pop_front();
            const int g = generation.at(x);
            std::vector<std::int64_t> next;
            if (sign < 0) {
                if (const Row* row = db.find(t, x))
                    for (int c : parents)
                        if (auto* r = std::get_if<Ref>(&row->values[static_cast<std::size_t>(c)])) next.push_back(r->x);
            } else if (auto it = children.find(x); it != children.end()) {
                next = it->second;
            }
            for (std::int64_t n : next) {
                if (generation.count(n) || !db.find(t, n)) continue;
                generation[n] = g + sign;
                queue.push_back(n);
            }
        }
    };
    walk(-1);
    walk(+1);

    std::vector<GenerationEntry> out;
    out.reserve(generation.size());
    for (const auto& [x, g] : generation) out.push_back({x, g, generation_label(g)});
    const PersonKeys keys(db, t);
    std::sort(out.begin(), out.end(), [&](const GenerationEntry& a, const GenerationEntry& b) {
        if (a.generation != b.generation) return a.generation < b.generation;
        const PersonKey ka = keys(a.person), kb = keys(b.person);
        if (int c = compare_years(ka.birth, kb.birth); c != 0) return c < 0;
        if (int c = compare_names(ka.name, kb.name); c != 0) return c < 0;
        return a.person < b.person;
    });
    return out;
}

}  // namespace emdm
