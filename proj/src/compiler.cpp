#include "emdm/compiler.hpp"

#include <algorithm>
#include <map>

#include "emdm/errors.hpp"

namespace emdm {

const char* kind_name(ConstraintKind k) {
    switch (k) {
        case ConstraintKind::Uniqueness: return "Uniqueness";
        case ConstraintKind::Acyclicity: return "Acyclicity";
        case ConstraintKind::Existence: return "Existence";
        case ConstraintKind::RowLocal: return "RowLocal";
        case ConstraintKind::CrossRow: return "CrossRow";
        case ConstraintKind::CrossTable: return "CrossTable";
        case ConstraintKind::Temporal: return "Temporal";
    }
    return "?";
}

int TableDef::column_index(std::string_view n) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i].name == n) return static_cast<int>(i);
    return -1;
}

int TableDef::derived_index(std::string_view n) const {
    for (std::size_t i = 0; i < derived.size(); ++i)
        if (derived[i].name == n) return static_cast<int>(i);
    return -1;
}

int CompiledSchema::table_index(std::string_view n) const {
    for (std::size_t i = 0; i < tables.size(); ++i)
        if (tables[i].name == n) return static_cast<int>(i);
    return -1;
}

const TableDef& CompiledSchema::table(std::string_view n) const {
    const int i = table_index(n);
    if (i < 0) throw UnknownTable("unknown table '" + std::string(n) + "'");
    return tables[static_cast<std::size_t>(i)];
}

const CompiledConstraint* CompiledSchema::find_constraint(std::string_view id) const {
    for (const auto& c : constraints)
        if (c.id == id) return &c;
    return nullptr;
}

namespace {

struct CompileFailure {};

const char* kMiddleDot = "\xC2\xB7";

std::string dot_join(const std::vector<std::string>& names) {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) out += (i ? kMiddleDot : "") + names[i];
    return out;
}

class Compiler {
public:
    Compiler(const SchemaDoc& doc, std::vector<Diagnostic>& diags) : doc_(doc), diags_(diags) {}

    std::shared_ptr<CompiledSchema> run() {
        auto cs = std::make_shared<CompiledSchema>();
        cs_ = cs.get();
        cs->doc = std::make_shared<SchemaDoc>(doc_);
        cs->digest = doc_.source_digest;
        cs->rules = doc_.rules;
        try {
            build_tables();
            for (std::size_t i = 0; i < doc_.derived.size(); ++i) build_derived(doc_.derived[i]);
            for (const auto& c : doc_.constraints) build_constraint(c);
            build_implicit_keys();
        } catch (const CompileFailure&) {
            return nullptr;
        }
        if (has_errors(diags_)) return nullptr;
        return cs;
    }

private:
    [[noreturn]] void fail(SourceSpan span, std::string message) {
        diags_.push_back(Diagnostic{Severity::Error, "CompileError", span, std::move(message)});
        throw CompileFailure{};
    }

    int table_of(const std::string& set) const { return cs_->table_index(set); }

    void build_tables() {
        for (const auto& s : doc_.sets) {
            TableDef t;
            t.name = s.name;
            ColumnDef x{"x", ValueDomain{NaturalBits{32}}, -1, false, true};
            if (const FunctionDecl* f = doc_.find_function(s.name, "x")) {
                const auto* dom = std::get_if<ValueDomain>(&f->codomain);
                if (!f->is_key || !dom || !std::holds_alternative<NaturalBits>(*dom))
                    fail(f->span, "surrogate x of " + s.name + " must be declared as x : " + s.name + " <-> NAT(n)");
                x.value = *dom;
                t.declared_surrogate = true;
            }
            t.columns.push_back(std::move(x));
            t.unique_keys.push_back(UniqueKey{{KeyPart{0, -1}}, s.name + ".x"});
            cs_->tables.push_back(std::move(t));
        }
        for (const auto& f : doc_.functions) {
            if (f.name == "x") continue;
            TableDef& t = cs_->tables[static_cast<std::size_t>(table_of(f.domain))];
            ColumnDef c;
            c.name = f.name;
            c.nullable = f.nullable;
            c.is_key = f.is_key;
            if (auto* ref = std::get_if<SetRef>(&f.codomain)) {
                c.ref_table = table_of(ref->set);
                if (f.is_key) fail(f.span, "key function '" + f.name + "' must map to a value domain");
            } else {
                c.value = std::get<ValueDomain>(f.codomain);
            }
            const int index = static_cast<int>(t.columns.size());
            if (c.is_ref()) t.foreign_keys.push_back(ForeignKey{index, c.ref_table});
            if (c.is_key) t.unique_keys.push_back(UniqueKey{{KeyPart{index, -1}}, t.name + "." + f.name});
            t.columns.push_back(std::move(c));
        }
    }

    // -- formula lowering ----------------------------------------------------

    struct Env {
        std::vector<std::pair<std::string, ir::NodePtr>> vars;
        ir::NodePtr lookup(const std::string& n) const {
            for (auto it = vars.rbegin(); it != vars.rend(); ++it)
                if (it->first == n) return it->second;
            return nullptr;
        }
    };

    struct SlotState {
        std::vector<int> tables;
    };

    static std::shared_ptr<ir::Node> node(ir::Op op) {
        auto n = std::make_shared<ir::Node>();
        n->op = op;
        return n;
    }

    ir::NodePtr lower(const Expr& e, Env& env, SlotState& slots) {
        using ir::Op;
        switch (e.kind) {
            case ExprKind::Forall:
            case ExprKind::Exists: {
                auto n = node(e.kind == ExprKind::Forall ? Op::Forall : Op::Exists);
                n->table = table_of(e.name);
                const std::size_t depth = env.vars.size();
                for (const auto& v : e.vars) {
                    const int slot = static_cast<int>(slots.tables.size());
                    slots.tables.push_back(n->table);
                    n->slots.push_back(slot);
                    auto var = node(Op::Var);
                    var->slot = slot;
                    var->table = n->table;
                    env.vars.emplace_back(v, var);
                }
                n->kids.push_back(lower(*e.operands[0], env, slots));
                env.vars.resize(depth);
                return n;
            }
            case ExprKind::Implies:
            case ExprKind::And:
            case ExprKind::Or: {
                auto n = node(e.kind == ExprKind::Implies ? Op::Implies : e.kind == ExprKind::And ? Op::And : Op::Or);
                n->kids = {lower(*e.operands[0], env, slots), lower(*e.operands[1], env, slots)};
                return n;
            }
            case ExprKind::Not: {
                auto n = node(Op::Not);
                n->kids = {lower(*e.operands[0], env, slots)};
                return n;
            }
            case ExprKind::Compare: {
                auto n = node(Op::Compare);
                n->cmp = e.cmp;
                n->kids = {lower(*e.operands[0], env, slots), lower(*e.operands[1], env, slots)};
                return n;
            }
            case ExprKind::Arith: {
                auto n = node(Op::Arith);
                n->arith = e.arith;
                n->kids = {lower(*e.operands[0], env, slots), lower(*e.operands[1], env, slots)};
                return n;
            }
            case ExprKind::Apply: return lower_apply(e, env, slots);
            case ExprKind::Var: {
                auto v = env.lookup(e.name);
                if (!v) fail(e.span, "unbound variable '" + e.name + "'");
                return v;
            }
            case ExprKind::IntLit: {
                auto n = node(Op::Int);
                n->ival = e.int_value;
                return n;
            }
            case ExprKind::StrLit: {
                auto n = node(Op::Str);
                n->sval = e.str_value;
                return n;
            }
            case ExprKind::IsNullCoalesce: {
                auto n = node(Op::Coalesce);
                n->kids = {lower(*e.operands[0], env, slots), lower(*e.operands[1], env, slots)};
                return n;
            }
            case ExprKind::InNulls:
            case ExprKind::NotInNulls: {
                auto n = node(e.kind == ExprKind::InNulls ? Op::IsNull : Op::NotNull);
                n->kids = {lower(*e.operands[0], env, slots)};
                return n;
            }
            case ExprKind::InSet: {
                auto n = node(Op::InSet);
                n->literals = e.literals;
                n->kids = {lower(*e.operands[0], env, slots)};
                return n;
            }
            case ExprKind::CurrentYear: return node(Op::CurrentYear);
        }
        fail(e.span, "unsupported expression");
    }

    ir::NodePtr lower_apply(const Expr& e, Env& env, SlotState& slots) {
        const int t = table_of(e.domain);
        if (t < 0) fail(e.span, "function '" + e.name + "' has no resolved domain");
        auto arg = lower(*e.operands.at(0), env, slots);
        const TableDef& def = cs_->tables[static_cast<std::size_t>(t)];
        const int col = def.column_index(e.name);
        if (col >= 0) {
            auto n = node(ir::Op::Column);
            n->table = t;
            n->column = col;
            n->kids = {arg};
            return n;
        }
        const DerivedFunction* d = doc_.find_derived(e.domain, e.name);
        if (!d) fail(e.span, "unknown function '" + e.name + "' on " + e.domain);
        // Derived functions are inlined with `x` bound to the argument.
        Env inner;
        inner.vars.emplace_back("x", arg);
        std::vector<ir::NodePtr> parts;
        for (const auto& p : d->parts) parts.push_back(lower(*p, inner, slots));
        if (parts.size() == 1) return parts.front();
        auto n = node(ir::Op::Date);
        n->kids = std::move(parts);
        return n;
    }

    void build_derived(const DerivedFunction& d) {
        const int t = table_of(d.domain);
        DerivedDef def;
        def.name = d.name;
        Env env;
        auto row = node(ir::Op::Var);
        row->slot = 0;
        row->table = t;
        env.vars.emplace_back("x", row);
        SlotState slots;
        slots.tables.push_back(t);
        for (const auto& p : d.parts) def.parts.push_back(lower(*p, env, slots));
        cs_->tables[static_cast<std::size_t>(t)].derived.push_back(std::move(def));
    }

    // -- read analysis -------------------------------------------------------

    // Resolves a row-valued node to (slot, hops). Returns false for anything
    // that is not a plain chain of reference columns from a variable.
    static bool chain_of(const ir::Node& n, int& slot, std::vector<ColumnRef>& hops) {
        if (n.op == ir::Op::Var) {
            slot = n.slot;
            return true;
        }
        if (n.op == ir::Op::Column) {
            if (!chain_of(*n.kids[0], slot, hops)) return false;
            hops.push_back(ColumnRef{n.table, n.column});
            return true;
        }
        return false;
    }

    void collect_reads(const ir::Node& n, CompiledConstraint& c, const std::set<int>& outer) {
        if (n.op == ir::Op::Column) {
            c.reads_scope.insert(ColumnRef{n.table, n.column});
            c.scope_tables.insert(n.table);
            Read r;
            r.column = ColumnRef{n.table, n.column};
            if (!chain_of(*n.kids[0], r.slot, r.hops) || !outer.count(r.slot))
                c.inner_reads = true;
            else
                c.reads.push_back(std::move(r));
        }
        if (n.op == ir::Op::Forall || n.op == ir::Op::Exists) c.inner_tables.insert(n.table);
        for (const auto& k : n.kids) collect_reads(*k, c, outer);
    }

    // -- constraints ---------------------------------------------------------

    int common_domain(const std::vector<std::string>& names, SourceSpan span, const char* what) {
        std::vector<int> candidates;
        for (std::size_t t = 0; t < cs_->tables.size(); ++t) {
            bool all = true;
            for (const auto& n : names)
                all = all && (cs_->tables[t].column_index(n) > 0 || cs_->tables[t].derived_index(n) >= 0);
            if (all) candidates.push_back(static_cast<int>(t));
        }
        if (candidates.size() != 1)
            fail(span, std::string(what) + " " + dot_join(names) +
                           (candidates.empty() ? " has no common domain" : " has an ambiguous domain"));
        return candidates.front();
    }

    void build_constraint(const ConstraintDecl& decl) {
        CompiledConstraint c;
        c.id = decl.id;
        std::visit(
            [&](const auto& body) {
                using T = std::decay_t<decltype(body)>;
                if constexpr (std::is_same_v<T, InjectiveDecl>) {
                    build_injective(body, decl, c);
                } else if constexpr (std::is_same_v<T, AcyclicDecl>) {
                    build_acyclic(body, decl, c);
                } else if constexpr (std::is_same_v<T, ExistenceDecl>) {
                    build_existence(body, decl, c);
                } else {
                    build_formula(body, c);
                }
            },
            decl.body);
        cs_->constraints.push_back(std::move(c));
    }

    void build_injective(const InjectiveDecl& d, const ConstraintDecl& decl, CompiledConstraint& c) {
        const int t = common_domain(d.functions, decl.span, "injective product");
        TableDef& def = cs_->tables[static_cast<std::size_t>(t)];
        UniqueKey key;
        key.constraint_id = decl.id;
        for (const auto& n : d.functions) {
            KeyPart p;
            p.column = def.column_index(n);
            if (p.column < 0) {
                p.column = -1;
                p.derived = def.derived_index(n);
                collect_derived_scope(def.derived[static_cast<std::size_t>(p.derived)], c);
            } else {
                c.reads_scope.insert(ColumnRef{t, p.column});
            }
            key.parts.push_back(p);
        }
        c.kind = ConstraintKind::Uniqueness;
        c.table = t;
        c.unique_key = static_cast<int>(def.unique_keys.size());
        c.scope_tables.insert(t);
        c.display_text = dot_join(d.functions) + " injective";
        def.unique_keys.push_back(std::move(key));
    }

    void collect_derived_scope(const DerivedDef& d, CompiledConstraint& c) {
        CompiledConstraint scratch;
        for (const auto& p : d.parts) collect_reads(*p, scratch, {0});
        c.reads_scope.insert(scratch.reads_scope.begin(), scratch.reads_scope.end());
    }

    void build_acyclic(const AcyclicDecl& d, const ConstraintDecl& decl, CompiledConstraint& c) {
        int home = -1;
        for (const auto& n : d.functions) {
            int found = -1;
            for (std::size_t t = 0; t < cs_->tables.size(); ++t) {
                const int col = cs_->tables[t].column_index(n);
                if (col > 0 && cs_->tables[t].columns[static_cast<std::size_t>(col)].ref_table == static_cast<int>(t))
                    found = static_cast<int>(t);
            }
            if (found < 0) fail(decl.span, "ACYCLIC " + n + ": '" + n + "' is not a self-map on any set");
            if (home >= 0 && home != found) fail(decl.span, "ACYCLIC functions must all map one set to itself");
            home = found;
        }
        const TableDef& def = cs_->tables[static_cast<std::size_t>(home)];
        for (const auto& n : d.functions) {
            const int col = def.column_index(n);
            c.acyclic_columns.push_back(col);
            c.reads_scope.insert(ColumnRef{home, col});
        }
        c.kind = ConstraintKind::Acyclicity;
        c.table = home;
        c.scope_tables.insert(home);
        c.display_text = dot_join(d.functions) + " graph is acyclic";
    }

    void build_existence(const ExistenceDecl& d, const ConstraintDecl& decl, CompiledConstraint& c) {
        int home = -1;
        for (std::size_t t = 0; t < cs_->tables.size(); ++t)
            if (cs_->tables[t].column_index(d.if_known) > 0 && cs_->tables[t].column_index(d.then_known) > 0)
                home = static_cast<int>(t);
        if (home < 0)
            fail(decl.span, "EXISTENCE " + d.if_known + " |- " + d.then_known +
                                ": both functions must be stored on the same set");
        const TableDef& def = cs_->tables[static_cast<std::size_t>(home)];
        c.kind = ConstraintKind::Existence;
        c.table = home;
        c.if_column = def.column_index(d.if_known);
        c.then_column = def.column_index(d.then_known);
        c.reads_scope = {ColumnRef{home, c.if_column}, ColumnRef{home, c.then_column}};
        c.scope_tables.insert(home);
        c.display_text = d.if_known + " |- " + d.then_known;
    }

    void build_formula(const FormulaDecl& d, CompiledConstraint& c) {
        Env env;
        SlotState slots;
        c.formula = lower(*d.formula, env, slots);
        c.slot_count = static_cast<int>(slots.tables.size());
        c.slot_tables = slots.tables;
        c.temporal = d.temporal;

        ir::NodePtr cur = c.formula;
        while (cur->op == ir::Op::Forall) {
            c.outer_slots.insert(c.outer_slots.end(), cur->slots.begin(), cur->slots.end());
            cur = cur->kids[0];
        }
        c.body = cur;
        const std::set<int> outer(c.outer_slots.begin(), c.outer_slots.end());
        collect_reads(*c.body, c, outer);

        for (std::size_t i = 0; i < c.outer_slots.size(); ++i)
            for (std::size_t j = i + 1; j < c.outer_slots.size(); ++j)
                if (slots.tables[static_cast<std::size_t>(c.outer_slots[i])] ==
                    slots.tables[static_cast<std::size_t>(c.outer_slots[j])])
                    c.symmetric = true;

        bool hops = false;
        for (const auto& r : c.reads) hops = hops || !r.hops.empty();
        if (d.temporal)
            c.kind = ConstraintKind::Temporal;
        else if (c.scope_tables.size() > 1)
            c.kind = ConstraintKind::CrossTable;
        else if (hops || c.outer_slots.size() > 1 || c.inner_reads)
            c.kind = ConstraintKind::CrossRow;
        else
            c.kind = ConstraintKind::RowLocal;
        c.display_text = (d.temporal ? "ALWAYS " : "") + render_formula(*d.formula);
    }

    void build_implicit_keys() {
        for (std::size_t t = 0; t < cs_->tables.size(); ++t) {
            const TableDef& def = cs_->tables[t];
            for (std::size_t k = 0; k < def.unique_keys.size(); ++k) {
                const UniqueKey& key = def.unique_keys[k];
                if (key.parts.size() != 1 || key.parts[0].column < 0 || !def.columns[key.parts[0].column].is_key)
                    continue;
                CompiledConstraint c;
                c.id = key.constraint_id;
                c.kind = ConstraintKind::Uniqueness;
                c.implicit = true;
                c.table = static_cast<int>(t);
                c.unique_key = static_cast<int>(k);
                c.reads_scope.insert(ColumnRef{static_cast<int>(t), key.parts[0].column});
                c.scope_tables.insert(static_cast<int>(t));
                const std::string& col = def.columns[static_cast<std::size_t>(key.parts[0].column)].name;
                c.display_text = col == "x" ? "x unique on " + def.name : col + " injective";
                cs_->constraints.push_back(std::move(c));
            }
        }
    }

    const SchemaDoc& doc_;
    std::vector<Diagnostic>& diags_;
    CompiledSchema* cs_ = nullptr;
};

bool rule_is_recursive(const DatalogRule& r) {
    for (const auto& a : r.body)
        if (a.predicate == r.head) return true;
    return false;
}

}  // namespace

std::vector<Diagnostic> lint_meta_axioms(const SchemaDoc& doc) {
    std::vector<Diagnostic> out;
    auto warn = [&](std::string code, SourceSpan span, std::string message) {
        out.push_back(Diagnostic{Severity::Warning, std::move(code), span, std::move(message)});
    };

    for (const auto& s : doc.sets) {
        if (doc.find_function(s.name, "x")) continue;
        const FunctionDecl* natural = nullptr;
        for (const auto& f : doc.functions)
            if (f.domain == s.name && f.is_key) natural = &f;
        if (natural)
            warn("NaturalKeyDemoted", natural->span,
                 "'" + natural->name + "' is kept as a unique key; " + s.name + " gets surrogate x : NAT(32)");
        else
            warn("MissingSurrogate", s.span, s.name + " declares no surrogate; x : NAT(32) added");
    }

    // A value column that copies another set's natural key should be a reference.
    for (const auto& f : doc.functions) {
        if (!std::holds_alternative<ValueDomain>(f.codomain) || f.is_key) continue;
        for (const auto& g : doc.functions) {
            if (g.is_key && g.name == f.name && g.domain != f.domain && g.name != "x")
                warn("NaturalKeyReference", f.span,
                     f.domain + "." + f.name + " duplicates the natural key of " + g.domain +
                         "; reference " + g.domain + " through its surrogate instead");
        }
    }

    for (std::size_t i = 0; i < doc.constraints.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (structurally_equal(doc.constraints[i], doc.constraints[j], false)) {
                warn("DuplicateConstraint", doc.constraints[i].span,
                     "constraint " + doc.constraints[i].id + " repeats " + doc.constraints[j].id);
                break;
            }

    // A recursive rule whose head variables are all bound by non-recursive
    // atoms only re-derives what its base case already derived.
    for (const auto& r : doc.rules) {
        if (!rule_is_recursive(r)) continue;
        for (const auto& a : r.body) {
            if (a.predicate == r.head) continue;
            std::set<std::string> bound;
            for (const auto& arg : a.args)
                if (auto* v = std::get_if<DatalogVar>(&arg.term)) bound.insert(v->name);
            const bool covers = std::all_of(r.head_args.begin(), r.head_args.end(),
                                            [&](const std::string& h) { return bound.count(h) > 0; });
            if (covers) {
                warn("IneffectiveRecursion", r.span,
                     "recursive rule for " + r.head + " binds every head variable through " + a.predicate +
                         " and never extends the relation");
                break;
            }
        }
    }
    return out;
}

CompileResult compile(const SchemaDoc& doc) {
    CompileResult result;
    Compiler compiler(doc, result.diagnostics);
    auto cs = compiler.run();
    if (cs) {
        auto lints = lint_meta_axioms(doc);
        result.diagnostics.insert(result.diagnostics.end(), lints.begin(), lints.end());
        result.schema = std::move(cs);
    }
    return result;
}

CompileResult compile_source(std::string_view text) {
    ParseResult parsed = parse_schema(text);
    if (!parsed.doc) return CompileResult{nullptr, std::move(parsed.diagnostics)};
    CompileResult result = compile(*parsed.doc);
    result.diagnostics.insert(result.diagnostics.begin(), parsed.diagnostics.begin(), parsed.diagnostics.end());
    return result;
}

std::set<std::pair<std::string, std::string>> dependency_scope(const ConstraintDecl& c, const SchemaDoc& doc) {
    SchemaDoc single = doc;
    single.constraints = {c};
    std::vector<Diagnostic> diags;
    Compiler compiler(single, diags);
    auto cs = compiler.run();
    std::set<std::pair<std::string, std::string>> out;
    if (!cs) return out;
    const auto* cc = cs->find_constraint(c.id);
    if (!cc) return out;
    for (const auto& ref : cc->reads_scope) {
        const auto& t = cs->tables[static_cast<std::size_t>(ref.table)];
        out.emplace(t.name, t.columns[static_cast<std::size_t>(ref.column)].name);
    }
    return out;
}

SchemaStats schema_stats(const CompiledSchema& cs) {
    SchemaStats s;
    s.tables = static_cast<int>(cs.tables.size());
    for (const auto& t : cs.tables) {
        s.foreign_keys += static_cast<int>(t.foreign_keys.size());
        s.unique_keys += static_cast<int>(t.unique_keys.size());
    }
    s.compiled_constraints = static_cast<int>(cs.constraints.size());
    s.datalog_rules = static_cast<int>(cs.rules.size());
    return s;
}

}  // namespace emdm
