#include "emdm/ast.hpp"

#include <cstdio>

namespace emdm {

bool is_text_domain(const ValueDomain& d) {
    return std::holds_alternative<UnicodeText>(d) || std::holds_alternative<EnumChars>(d);
}

bool structurally_equal(const ExprPtr& a, const ExprPtr& b) {
    if (!a || !b) return !a && !b;
    return structurally_equal(*a, *b);
}

bool structurally_equal(const Expr& a, const Expr& b) {
    if (a.kind != b.kind || a.name != b.name || a.vars != b.vars) return false;
    switch (a.kind) {
        case ExprKind::Compare:
            if (a.cmp != b.cmp) return false;
            break;
        case ExprKind::Arith:
            if (a.arith != b.arith) return false;
            break;
        case ExprKind::IntLit:
            if (a.int_value != b.int_value) return false;
            break;
        case ExprKind::StrLit:
            if (a.str_value != b.str_value) return false;
            break;
        case ExprKind::InSet:
            if (a.literals != b.literals) return false;
            break;
        default:
            break;
    }
    if (a.operands.size() != b.operands.size()) return false;
    for (std::size_t i = 0; i < a.operands.size(); ++i)
        if (!structurally_equal(a.operands[i], b.operands[i])) return false;
    return true;
}

const SetDecl* SchemaDoc::find_set(std::string_view name) const {
    for (const auto& s : sets)
        if (s.name == name) return &s;
    return nullptr;
}

const FunctionDecl* SchemaDoc::find_function(std::string_view domain, std::string_view name) const {
    for (const auto& f : functions)
        if (f.domain == domain && f.name == name) return &f;
    return nullptr;
}

const DerivedFunction* SchemaDoc::find_derived(std::string_view domain, std::string_view name) const {
    for (const auto& d : derived)
        if (d.domain == domain && d.name == name) return &d;
    return nullptr;
}

std::vector<std::string> SchemaDoc::domains_of(std::string_view name) const {
    std::vector<std::string> out;
    auto add = [&](const std::string& d) {
        for (const auto& o : out)
            if (o == d) return;
        out.push_back(d);
    };
    for (const auto& f : functions)
        if (f.name == name) add(f.domain);
    for (const auto& d : derived)
        if (d.name == name) add(d.domain);
    return out;
}

ElementCounts count_elements(const SchemaDoc& doc) {
    return ElementCounts{
        static_cast<int>(doc.functions.size() + doc.derived.size()),
        static_cast<int>(doc.constraints.size()),
        static_cast<int>(doc.rules.size()),
    };
}

namespace {

bool same_body(const ConstraintBody& a, const ConstraintBody& b) {
    if (a.index() != b.index()) return false;
    if (auto* ia = std::get_if<InjectiveDecl>(&a)) return ia->functions == std::get<InjectiveDecl>(b).functions;
    if (auto* aa = std::get_if<AcyclicDecl>(&a)) return aa->functions == std::get<AcyclicDecl>(b).functions;
    if (auto* ea = std::get_if<ExistenceDecl>(&a)) {
        const auto& eb = std::get<ExistenceDecl>(b);
        return ea->if_known == eb.if_known && ea->then_known == eb.then_known;
    }
    const auto& fa = std::get<FormulaDecl>(a);
    const auto& fb = std::get<FormulaDecl>(b);
    return fa.temporal == fb.temporal && structurally_equal(fa.formula, fb.formula);
}

bool same_term(const DatalogTerm& a, const DatalogTerm& b) {
    if (a.index() != b.index()) return false;
    if (auto* va = std::get_if<DatalogVar>(&a)) return va->name == std::get<DatalogVar>(b).name;
    return std::get<Literal>(a) == std::get<Literal>(b);
}

bool same_rule(const DatalogRule& a, const DatalogRule& b) {
    if (a.head != b.head || a.head_args != b.head_args || a.body.size() != b.body.size()) return false;
    for (std::size_t i = 0; i < a.body.size(); ++i) {
        const auto& x = a.body[i];
        const auto& y = b.body[i];
        if (x.predicate != y.predicate || x.args.size() != y.args.size()) return false;
        for (std::size_t j = 0; j < x.args.size(); ++j) {
            if (x.args[j].field != y.args[j].field) return false;
            if (!same_term(x.args[j].term, y.args[j].term)) return false;
        }
    }
    return true;
}

}  // namespace

bool structurally_equal(const ConstraintDecl& a, const ConstraintDecl& b, bool compare_ids) {
    if (compare_ids && a.id != b.id) return false;
    return same_body(a.body, b.body);
}

bool structurally_equal(const SchemaDoc& a, const SchemaDoc& b) {
    if (a.sets.size() != b.sets.size() || a.functions.size() != b.functions.size() ||
        a.derived.size() != b.derived.size() || a.constraints.size() != b.constraints.size() ||
        a.rules.size() != b.rules.size())
        return false;
    for (std::size_t i = 0; i < a.sets.size(); ++i)
        if (a.sets[i].name != b.sets[i].name) return false;
    for (std::size_t i = 0; i < a.functions.size(); ++i) {
        const auto& f = a.functions[i];
        const auto& g = b.functions[i];
        if (f.name != g.name || f.domain != g.domain || f.nullable != g.nullable || f.is_key != g.is_key ||
            !(f.codomain == g.codomain))
            return false;
    }
    for (std::size_t i = 0; i < a.derived.size(); ++i) {
        const auto& f = a.derived[i];
        const auto& g = b.derived[i];
        if (f.name != g.name || f.domain != g.domain || f.parts.size() != g.parts.size()) return false;
        for (std::size_t j = 0; j < f.parts.size(); ++j)
            if (!structurally_equal(f.parts[j], g.parts[j])) return false;
    }
    for (std::size_t i = 0; i < a.constraints.size(); ++i)
        if (!structurally_equal(a.constraints[i], b.constraints[i])) return false;
    for (std::size_t i = 0; i < a.rules.size(); ++i)
        if (!same_rule(a.rules[i], b.rules[i])) return false;
    return true;
}

std::string digest_text(std::string_view text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace emdm
