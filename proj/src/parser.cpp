#include "emdm/parser.hpp"

#include <map>
#include <set>
#include <sstream>

#include "lexer.hpp"

namespace emdm {

using detail::Token;
using detail::TokKind;

bool has_errors(const std::vector<Diagnostic>& diags) {
    for (const auto& d : diags)
        if (d.severity == Severity::Error) return true;
    return false;
}

std::string format_diagnostic(const Diagnostic& d, std::string_view file) {
    std::ostringstream os;
    if (!file.empty()) os << file << ':';
    os << d.span.line << ':' << d.span.column << ": " << (d.severity == Severity::Error ? "error" : "warning") << " ["
       << d.code << "] " << d.message;
    return os.str();
}

namespace {

struct SyntaxFailure {};

std::shared_ptr<Expr> make(ExprKind kind, SourceSpan span) {
    auto e = std::make_shared<Expr>();
    e->kind = kind;
    e->span = span;
    return e;
}

ExprPtr binary(ExprKind kind, SourceSpan span, ExprPtr lhs, ExprPtr rhs) {
    auto e = make(kind, span);
    e->operands = {std::move(lhs), std::move(rhs)};
    return e;
}

// ---------------------------------------------------------------------------
// Recursive-descent parser producing an unresolved SchemaDoc.

class Parser {
public:
    Parser(std::vector<Token> toks, std::vector<Diagnostic>& diags) : toks_(std::move(toks)), diags_(diags) {}

    SchemaDoc parse_document() {
        SchemaDoc doc;
        while (!at_end()) {
            try {
                parse_item(doc);
                if (!at_end() && !at_item_start()) fail("unexpected '" + peek().text + "' after declaration");
            } catch (const SyntaxFailure&) {
                synchronize();
            }
        }
        return doc;
    }

    ExprPtr parse_standalone_formula() {
        try {
            auto f = formula();
            if (!at_end()) fail("unexpected '" + peek().text + "' after formula");
            return f;
        } catch (const SyntaxFailure&) {
            return nullptr;
        }
    }

private:
    // -- token helpers -----------------------------------------------------

    const Token& peek(std::size_t ahead = 0) const {
        const std::size_t i = pos_ + ahead;
        return i < toks_.size() ? toks_[i] : toks_.back();
    }
    bool at_end() const { return peek().kind == TokKind::End; }
    bool at_sym(std::string_view s, std::size_t ahead = 0) const {
        return peek(ahead).kind == TokKind::Symbol && peek(ahead).text == s;
    }
    bool at_word(std::string_view w, std::size_t ahead = 0) const {
        return peek(ahead).kind == TokKind::Ident && peek(ahead).text == w;
    }
    const Token& next() {
        const Token& t = peek();
        if (pos_ < toks_.size() - 1) ++pos_;
        return t;
    }

    SourceSpan error_span() const {
        if (at_end() && pos_ > 0) return toks_[pos_ - 1].span;
        return peek().span;
    }

    [[noreturn]] void fail(const std::string& message) {
        diags_.push_back(Diagnostic{Severity::Error, "SyntaxError", error_span(), message});
        throw SyntaxFailure{};
    }

    std::string describe(const Token& t) const { return t.kind == TokKind::End ? "end of input" : "'" + t.text + "'"; }

    const Token& expect_sym(std::string_view s) {
        if (!at_sym(s)) fail("expected '" + std::string(s) + "' but found " + describe(peek()));
        return next();
    }
    const Token& expect_word(std::string_view w) {
        if (!at_word(w)) fail("expected '" + std::string(w) + "' but found " + describe(peek()));
        return next();
    }
    const Token& expect_ident(std::string_view what) {
        if (peek().kind != TokKind::Ident || detail::is_keyword(peek().text))
            fail("expected " + std::string(what) + " but found " + describe(peek()));
        return next();
    }
    std::int64_t expect_int() {
        if (peek().kind != TokKind::Int) fail("expected integer but found " + describe(peek()));
        return next().value;
    }
    std::int64_t expect_signed_int() {
        if (at_sym("-")) {
            next();
            return -expect_int();
        }
        return expect_int();
    }

    bool at_item_start() const {
        const Token& t = peek();
        if (t.kind != TokKind::Ident) return false;
        if (t.text == "SET" || t.text == "INJECTIVE" || t.text == "ACYCLIC" || t.text == "EXISTENCE" ||
            t.text == "ALWAYS" || t.text == "CONSTRAINT")
            return true;
        if (detail::is_keyword(t.text)) return false;
        return at_sym(":", 1) || at_sym(":=", 1) || at_sym("(", 1);
    }

    void synchronize() {
        if (!at_end()) next();
        while (!at_end() && !(peek().line_start && at_item_start())) next();
    }

    // -- items -------------------------------------------------------------

    void parse_item(SchemaDoc& doc) {
        const Token& t = peek();
        if (t.kind != TokKind::Ident) fail("expected a declaration but found " + describe(t));
        if (t.text == "SET") {
            next();
            const Token& name = expect_ident("set name");
            doc.sets.push_back(SetDecl{name.text, name.span});
            return;
        }
        if (t.text == "INJECTIVE") {
            const SourceSpan span = next().span;
            InjectiveDecl d;
            d.functions.push_back(expect_ident("function name").text);
            if (!at_sym("*")) fail("INJECTIVE needs a product of at least two functions (f * g)");
            while (at_sym("*")) {
                next();
                d.functions.push_back(expect_ident("function name").text);
            }
            doc.constraints.push_back(ConstraintDecl{"", d, span});
            return;
        }
        if (t.text == "ACYCLIC") {
            const SourceSpan span = next().span;
            AcyclicDecl d;
            d.functions.push_back(expect_ident("function name").text);
            while (at_sym(",")) {
                next();
                d.functions.push_back(expect_ident("function name").text);
            }
            doc.constraints.push_back(ConstraintDecl{"", d, span});
            return;
        }
        if (t.text == "EXISTENCE") {
            const SourceSpan span = next().span;
            ExistenceDecl d;
            d.if_known = expect_ident("function name").text;
            expect_sym("|-");
            d.then_known = expect_ident("function name").text;
            doc.constraints.push_back(ConstraintDecl{"", d, span});
            return;
        }
        if (t.text == "ALWAYS" || t.text == "CONSTRAINT") {
            const SourceSpan span = t.span;
            FormulaDecl d;
            if (at_word("ALWAYS")) {
                next();
                d.temporal = true;
            }
            expect_word("CONSTRAINT");
            std::string id;
            if (!at_sym(":")) id = expect_ident("constraint name").text;
            expect_sym(":");
            d.formula = formula();
            doc.constraints.push_back(ConstraintDecl{id, d, span});
            return;
        }
        if (detail::is_keyword(t.text)) fail("unexpected keyword '" + t.text + "'");
        if (at_sym(":", 1)) return function_decl(doc);
        if (at_sym(":=", 1)) return derived_decl(doc);
        if (at_sym("(", 1)) return rule_decl(doc);
        fail("expected ':', ':=' or '(' after '" + t.text + "'");
    }

    void function_decl(SchemaDoc& doc) {
        FunctionDecl f;
        const Token& name = next();
        f.name = name.text;
        f.span = name.span;
        expect_sym(":");
        f.domain = expect_ident("domain set").text;
        if (at_sym("<->")) {
            f.is_key = true;
            next();
        } else {
            expect_sym("->");
        }
        if (peek().kind == TokKind::Ident && !detail::is_keyword(peek().text)) {
            f.codomain = SetRef{next().text};
        } else {
            f.codomain = value_domain();
        }
        if (at_sym("|")) {
            next();
            expect_word("NULLS");
            f.nullable = true;
        }
        if (f.is_key && f.nullable) {
            diags_.push_back(
                Diagnostic{Severity::Error, "SyntaxError", f.span, "key function '" + f.name + "' cannot be nullable"});
        }
        doc.functions.push_back(std::move(f));
    }

    ValueDomain value_domain() {
        const SourceSpan span = peek().span;
        if (at_word("NAT")) {
            next();
            expect_sym("(");
            const auto bits = expect_int();
            expect_sym(")");
            if (bits < 1 || bits > 63) domain_error(span, "NAT width must be within [1, 63]");
            return NaturalBits{static_cast<int>(bits)};
        }
        if (at_word("UNICODE")) {
            next();
            expect_sym("(");
            const auto len = expect_int();
            expect_sym(")");
            if (len < 1) domain_error(span, "UNICODE length must be positive");
            return UnicodeText{static_cast<int>(len)};
        }
        if (at_sym("{")) {
            next();
            EnumChars e;
            std::set<std::string> seen;
            do {
                if (peek().kind != TokKind::String) fail("expected a string literal in enumeration");
                const Token& v = next();
                if (count_code_points(v.text) != 1)
                    domain_error(v.span, "enumeration values must be single characters");
                if (!seen.insert(v.text).second)
                    diags_.push_back(Diagnostic{Severity::Error, "ResolveError", v.span,
                                                "duplicate enumeration value \"" + v.text + "\""});
                e.values.push_back(v.text);
            } while (at_sym(",") && (next(), true));
            expect_sym("}");
            return e;
        }
        if (at_sym("[")) {
            next();
            IntRange r;
            r.lo = bound();
            expect_sym(",");
            r.hi = bound();
            expect_sym("]");
            if (auto* lo = std::get_if<std::int64_t>(&r.lo))
                if (auto* hi = std::get_if<std::int64_t>(&r.hi))
                    if (*lo > *hi) domain_error(span, "empty range: lower bound exceeds upper bound");
            return r;
        }
        fail("expected a set name or value domain but found " + describe(peek()));
    }

    Bound bound() {
        if (at_word("CurrentYear")) {
            next();
            expect_sym("(");
            expect_sym(")");
            return CurrentYearBound{};
        }
        return expect_signed_int();
    }

    void domain_error(SourceSpan span, std::string message) {
        diags_.push_back(Diagnostic{Severity::Error, "SyntaxError", span, std::move(message)});
    }

    static int count_code_points(const std::string& s) {
        int n = 0;
        for (unsigned char c : s)
            if ((c & 0xC0) != 0x80) ++n;
        return n;
    }

    void derived_decl(SchemaDoc& doc) {
        DerivedFunction d;
        const Token& name = next();
        d.name = name.text;
        d.span = name.span;
        expect_sym(":=");
        d.parts.push_back(formula());
        if (at_sym("*")) {
            next();
            d.parts.push_back(formula());
            expect_sym("*");
            d.parts.push_back(formula());
        }
        doc.derived.push_back(std::move(d));
    }

    void rule_decl(SchemaDoc& doc) {
        DatalogRule r;
        const Token& head = next();
        r.head = head.text;
        r.span = head.span;
        expect_sym("(");
        if (!at_sym(")")) {
            r.head_args.push_back(expect_ident("variable").text);
            while (at_sym(",")) {
                next();
                r.head_args.push_back(expect_ident("variable").text);
            }
        }
        expect_sym(")");
        expect_sym("<-");
        r.body.push_back(atom());
        while (at_sym(",")) {
            next();
            r.body.push_back(atom());
        }
        doc.rules.push_back(std::move(r));
    }

    Atom atom() {
        Atom a;
        const Token& pred = expect_ident("predicate name");
        a.predicate = pred.text;
        a.span = pred.span;
        expect_sym("(");
        if (!at_sym(")")) {
            a.args.push_back(atom_arg());
            while (at_sym(",")) {
                next();
                a.args.push_back(atom_arg());
            }
        }
        expect_sym(")");
        return a;
    }

    AtomArg atom_arg() {
        AtomArg arg;
        if (peek().kind == TokKind::Ident && at_sym("=", 1)) {
            arg.field = next().text;
            next();
        }
        if (peek().kind == TokKind::String) {
            arg.term = Literal{next().text};
        } else if (peek().kind == TokKind::Int || at_sym("-")) {
            arg.term = Literal{expect_signed_int()};
        } else {
            arg.term = DatalogVar{expect_ident("variable or constant").text};
        }
        return arg;
    }

    // -- formulas ----------------------------------------------------------

    ExprPtr formula() {
        if (at_word("forall") || at_word("exists")) return quantifier();
        return implication();
    }

    ExprPtr quantifier() {
        const Token& q = next();
        auto e = make(q.text == "forall" ? ExprKind::Forall : ExprKind::Exists, q.span);
        e->vars.push_back(expect_ident("variable").text);
        while (at_sym(",")) {
            next();
            e->vars.push_back(expect_ident("variable").text);
        }
        expect_word("in");
        e->name = expect_ident("set name").text;
        expect_sym(":");
        e->operands.push_back(formula());
        return e;
    }

    ExprPtr implication() {
        auto lhs = disjunction();
        if (at_sym("=>")) {
            const SourceSpan span = next().span;
            return binary(ExprKind::Implies, span, lhs, formula());
        }
        return lhs;
    }

    ExprPtr disjunction() {
        auto lhs = conjunction();
        while (at_word("or")) {
            const SourceSpan span = next().span;
            lhs = binary(ExprKind::Or, span, lhs, conjunction());
        }
        return lhs;
    }

    ExprPtr conjunction() {
        auto lhs = negation();
        while (at_word("and")) {
            const SourceSpan span = next().span;
            lhs = binary(ExprKind::And, span, lhs, negation());
        }
        return lhs;
    }

    ExprPtr negation() {
        if (at_word("not")) {
            auto e = make(ExprKind::Not, next().span);
            e->operands.push_back(negation());
            return e;
        }
        if (at_word("forall") || at_word("exists")) return quantifier();
        return comparison();
    }

    bool at_compare_op(CompareOp& op) const {
        if (peek().kind != TokKind::Symbol) return false;
        const std::string& s = peek().text;
        if (s == "=") op = CompareOp::Eq;
        else if (s == "<>" || s == "!=") op = CompareOp::Ne;
        else if (s == "<") op = CompareOp::Lt;
        else if (s == "<=") op = CompareOp::Le;
        else if (s == ">") op = CompareOp::Gt;
        else if (s == ">=") op = CompareOp::Ge;
        else return false;
        return true;
    }

    // a < b <= c is sugar for (a < b) and (b <= c).
    ExprPtr comparison() {
        auto lhs = membership();
        CompareOp op;
        ExprPtr result;
        while (at_compare_op(op)) {
            const SourceSpan span = next().span;
            auto rhs = membership();
            auto cmp = make(ExprKind::Compare, span);
            cmp->cmp = op;
            cmp->operands = {lhs, rhs};
            result = result ? binary(ExprKind::And, span, result, cmp) : ExprPtr(cmp);
            lhs = rhs;
        }
        return result ? result : lhs;
    }

    ExprPtr membership() {
        auto operand = additive();
        if (at_word("in") || (at_word("not") && at_word("in", 1))) {
            const bool negated = at_word("not");
            const SourceSpan span = peek().span;
            next();
            if (negated) next();
            if (at_word("NULLS")) {
                next();
                auto e = make(negated ? ExprKind::NotInNulls : ExprKind::InNulls, span);
                e->operands.push_back(operand);
                return e;
            }
            if (negated) fail("expected NULLS after 'not in'");
            expect_sym("{");
            auto e = make(ExprKind::InSet, span);
            e->operands.push_back(operand);
            do {
                if (peek().kind == TokKind::String)
                    e->literals.emplace_back(next().text);
                else
                    e->literals.emplace_back(expect_signed_int());
            } while (at_sym(",") && (next(), true));
            expect_sym("}");
            return e;
        }
        return operand;
    }

    ExprPtr additive() {
        auto lhs = primary();
        while (at_sym("+") || at_sym("-")) {
            const Token& op = next();
            auto e = make(ExprKind::Arith, op.span);
            e->arith = op.text == "+" ? ArithOp::Add : ArithOp::Sub;
            e->operands = {lhs, primary()};
            lhs = e;
        }
        return lhs;
    }

    ExprPtr primary() {
        const Token& t = peek();
        if (t.kind == TokKind::Int || (at_sym("-") && peek(1).kind == TokKind::Int)) {
            auto e = make(ExprKind::IntLit, t.span);
            e->int_value = expect_signed_int();
            return e;
        }
        if (t.kind == TokKind::String) {
            auto e = make(ExprKind::StrLit, t.span);
            e->str_value = next().text;
            return e;
        }
        if (at_sym("(")) {
            next();
            auto inner = formula();
            expect_sym(")");
            return inner;
        }
        if (at_word("CurrentYear")) {
            auto e = make(ExprKind::CurrentYear, next().span);
            expect_sym("(");
            expect_sym(")");
            return e;
        }
        if (at_word("isNull")) {
            auto e = make(ExprKind::IsNullCoalesce, next().span);
            expect_sym("(");
            e->operands.push_back(formula());
            expect_sym(",");
            e->operands.push_back(formula());
            expect_sym(")");
            return e;
        }
        if (t.kind == TokKind::Ident && !detail::is_keyword(t.text)) {
            next();
            if (at_sym("(")) {
                auto e = make(ExprKind::Apply, t.span);
                e->name = t.text;
                next();
                if (!at_sym(")")) {
                    e->operands.push_back(formula());
                    while (at_sym(",")) {
                        next();
                        e->operands.push_back(formula());
                    }
                }
                expect_sym(")");
                return e;
            }
            auto e = make(ExprKind::Var, t.span);
            e->name = t.text;
            return e;
        }
        fail("expected an expression but found " + describe(t));
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    std::vector<Diagnostic>& diags_;
};

// ---------------------------------------------------------------------------
// Name resolution and type checking.

enum class TypeKind { Bool, Int, Text, Entity, Date, Error };

struct Type {
    TypeKind kind = TypeKind::Error;
    std::string set;  // Entity only

    bool operator==(const Type&) const = default;
};

std::string type_name(const Type& t) {
    switch (t.kind) {
        case TypeKind::Bool: return "boolean";
        case TypeKind::Int: return "integer";
        case TypeKind::Text: return "text";
        case TypeKind::Entity: return "element of " + t.set;
        case TypeKind::Date: return "date";
        case TypeKind::Error: return "<error>";
    }
    return "?";
}

class Resolver {
public:
    Resolver(const SchemaDoc& doc, std::vector<Diagnostic>& diags) : doc_(doc), diags_(diags) {}

    struct Scope {
        std::vector<std::pair<std::string, std::string>> vars;  // name -> set
        const std::string* lookup(const std::string& n) const {
            for (auto it = vars.rbegin(); it != vars.rend(); ++it)
                if (it->first == n) return &it->second;
            return nullptr;
        }
    };

    // Checks a closed formula; returns the resolved copy or null on error.
    ExprPtr closed_formula(const ExprPtr& e) {
        Scope scope;
        Type t;
        const std::size_t before = error_count();
        auto out = check(e, scope, t);
        if (t.kind != TypeKind::Bool && t.kind != TypeKind::Error)
            error("TypeError", e->span, "a constraint must be a proposition, not a " + type_name(t));
        return error_count() == before ? out : nullptr;
    }

    ExprPtr with_var(const ExprPtr& e, const std::string& var, const std::string& set, Type& t) {
        Scope scope;
        scope.vars.emplace_back(var, set);
        return check(e, scope, t);
    }

    // Derived functions visible so far (a derived body may only use earlier ones).
    void set_visible_derived(std::size_t n) { visible_derived_ = n; }

    void error(std::string code, SourceSpan span, std::string message) {
        diags_.push_back(Diagnostic{Severity::Error, std::move(code), span, std::move(message)});
    }

    std::size_t error_count() const {
        std::size_t n = 0;
        for (const auto& d : diags_)
            if (d.severity == Severity::Error) ++n;
        return n;
    }

    const DerivedFunction* visible_derived(const std::string& domain, const std::string& name) const {
        for (std::size_t i = 0; i < visible_derived_ && i < doc_.derived.size(); ++i)
            if (doc_.derived[i].domain == domain && doc_.derived[i].name == name) return &doc_.derived[i];
        return nullptr;
    }

    Type derived_type(const DerivedFunction& d) const {
        if (d.is_date()) return Type{TypeKind::Date, {}};
        return derived_types_.count(&d) ? derived_types_.at(&d) : Type{TypeKind::Int, {}};
    }
    void record_derived_type(const DerivedFunction* d, Type t) { derived_types_[d] = std::move(t); }

private:
    ExprPtr check(const ExprPtr& in, Scope& scope, Type& out) {
        auto e = std::make_shared<Expr>(*in);
        out = Type{};
        switch (in->kind) {
            case ExprKind::Forall:
            case ExprKind::Exists: {
                if (!doc_.find_set(in->name)) error("ResolveError", in->span, "unknown set '" + in->name + "'");
                const std::size_t depth = scope.vars.size();
                for (const auto& v : in->vars) {
                    if (scope.lookup(v)) error("ResolveError", in->span, "variable '" + v + "' is already bound");
                    scope.vars.emplace_back(v, in->name);
                }
                Type body;
                e->operands[0] = check(in->operands[0], scope, body);
                scope.vars.resize(depth);
                expect_bool(body, in->operands[0]->span);
                out = Type{TypeKind::Bool, {}};
                break;
            }
            case ExprKind::Implies:
            case ExprKind::And:
            case ExprKind::Or: {
                Type a, b;
                e->operands[0] = check(in->operands[0], scope, a);
                e->operands[1] = check(in->operands[1], scope, b);
                expect_bool(a, in->operands[0]->span);
                expect_bool(b, in->operands[1]->span);
                out = Type{TypeKind::Bool, {}};
                break;
            }
            case ExprKind::Not: {
                Type a;
                e->operands[0] = check(in->operands[0], scope, a);
                expect_bool(a, in->operands[0]->span);
                out = Type{TypeKind::Bool, {}};
                break;
            }
            case ExprKind::Compare: {
                Type a, b;
                e->operands[0] = check(in->operands[0], scope, a);
                e->operands[1] = check(in->operands[1], scope, b);
                out = Type{TypeKind::Bool, {}};
                if (a.kind == TypeKind::Error || b.kind == TypeKind::Error) break;
                if (a.kind == TypeKind::Bool || b.kind == TypeKind::Bool) {
                    error("TypeError", in->span, "cannot compare propositions");
                } else if (!(a == b)) {
                    error("TypeError", in->span, "cannot compare " + type_name(a) + " with " + type_name(b));
                } else if (a.kind == TypeKind::Entity && in->cmp != CompareOp::Eq && in->cmp != CompareOp::Ne) {
                    error("TypeError", in->span, "elements of " + a.set + " are only comparable with = and <>");
                }
                break;
            }
            case ExprKind::Arith: {
                Type a, b;
                e->operands[0] = check(in->operands[0], scope, a);
                e->operands[1] = check(in->operands[1], scope, b);
                expect_int(a, in->operands[0]->span);
                expect_int(b, in->operands[1]->span);
                out = Type{TypeKind::Int, {}};
                break;
            }
            case ExprKind::Apply:
                out = check_apply(in, *e, scope);
                break;
            case ExprKind::Var: {
                if (const std::string* set = scope.lookup(in->name)) {
                    out = Type{TypeKind::Entity, *set};
                } else {
                    error("UnboundVarError", in->span, "variable '" + in->name + "' is not bound by a quantifier");
                }
                break;
            }
            case ExprKind::IntLit:
            case ExprKind::CurrentYear:
                out = Type{TypeKind::Int, {}};
                break;
            case ExprKind::StrLit:
                out = Type{TypeKind::Text, {}};
                break;
            case ExprKind::IsNullCoalesce: {
                Type a, b;
                e->operands[0] = check(in->operands[0], scope, a);
                e->operands[1] = check(in->operands[1], scope, b);
                if (a.kind == TypeKind::Error || b.kind == TypeKind::Error) break;
                if (a.kind == TypeKind::Bool || !(a == b)) {
                    error("TypeError", in->span, "isNull operands must share a value type (got " + type_name(a) +
                                                     " and " + type_name(b) + ")");
                    break;
                }
                out = a;
                break;
            }
            case ExprKind::InNulls:
            case ExprKind::NotInNulls: {
                Type a;
                e->operands[0] = check(in->operands[0], scope, a);
                if (a.kind == TypeKind::Bool) error("TypeError", in->span, "a proposition cannot be NULL");
                out = Type{TypeKind::Bool, {}};
                break;
            }
            case ExprKind::InSet: {
                Type a;
                e->operands[0] = check(in->operands[0], scope, a);
                out = Type{TypeKind::Bool, {}};
                if (a.kind == TypeKind::Error) break;
                for (const auto& lit : in->literals) {
                    const bool is_int = std::holds_alternative<std::int64_t>(lit);
                    if ((is_int && a.kind != TypeKind::Int) || (!is_int && a.kind != TypeKind::Text)) {
                        error("TypeError", in->span, "set literal does not match operand type " + type_name(a));
                        break;
                    }
                }
                break;
            }
        }
        return e;
    }

    Type check_apply(const ExprPtr& in, Expr& e, Scope& scope) {
        if (in->operands.size() != 1) {
            error("ArityError", in->span,
                  "function '" + in->name + "' takes exactly one argument, got " + std::to_string(in->operands.size()));
            for (std::size_t i = 0; i < in->operands.size(); ++i) {
                Type ignored;
                e.operands[i] = check(in->operands[i], scope, ignored);
            }
            return Type{};
        }
        Type arg;
        e.operands[0] = check(in->operands[0], scope, arg);
        if (arg.kind == TypeKind::Error) return Type{};
        if (arg.kind != TypeKind::Entity) {
            if (doc_.domains_of(in->name).empty())
                error("ResolveError", in->span, "unknown function '" + in->name + "'");
            else
                error("TypeError", in->span, "function '" + in->name + "' applied to a " + type_name(arg));
            return Type{};
        }
        e.domain = arg.set;
        if (const FunctionDecl* f = doc_.find_function(arg.set, in->name)) {
            if (auto* ref = std::get_if<SetRef>(&f->codomain)) return Type{TypeKind::Entity, ref->set};
            const auto& dom = std::get<ValueDomain>(f->codomain);
            return Type{is_text_domain(dom) ? TypeKind::Text : TypeKind::Int, {}};
        }
        if (const DerivedFunction* d = visible_derived(arg.set, in->name)) return derived_type(*d);
        error("ResolveError", in->span, "function '" + in->name + "' is not defined on " + arg.set);
        return Type{};
    }

    void expect_bool(const Type& t, SourceSpan span) {
        if (t.kind != TypeKind::Bool && t.kind != TypeKind::Error)
            error("TypeError", span, "expected a proposition, found a " + type_name(t));
    }
    void expect_int(const Type& t, SourceSpan span) {
        if (t.kind != TypeKind::Int && t.kind != TypeKind::Error)
            error("TypeError", span, "expected an integer, found a " + type_name(t));
    }

    const SchemaDoc& doc_;
    std::vector<Diagnostic>& diags_;
    std::size_t visible_derived_ = static_cast<std::size_t>(-1);
    std::map<const DerivedFunction*, Type> derived_types_;
};

void collect_applied_to(const Expr& e, const std::string& var, std::vector<std::string>& names) {
    if (e.kind == ExprKind::Apply && e.operands.size() == 1 && e.operands[0]->kind == ExprKind::Var &&
        e.operands[0]->name == var)
        names.push_back(e.name);
    for (const auto& op : e.operands) collect_applied_to(*op, var, names);
}

bool mentions_var(const Expr& e, const std::string& var) {
    if (e.kind == ExprKind::Var && e.name == var) return true;
    for (const auto& op : e.operands)
        if (mentions_var(*op, var)) return true;
    return false;
}

void resolve_document(SchemaDoc& doc, std::vector<Diagnostic>& diags) {
    auto error = [&](std::string code, SourceSpan span, std::string message) {
        diags.push_back(Diagnostic{Severity::Error, std::move(code), span, std::move(message)});
    };

    std::set<std::string> set_names;
    for (const auto& s : doc.sets) {
        if (detail::is_keyword(s.name)) error("SyntaxError", s.span, "'" + s.name + "' is a keyword");
        if (!set_names.insert(s.name).second) error("ResolveError", s.span, "duplicate set '" + s.name + "'");
    }

    std::set<std::pair<std::string, std::string>> fn_names;
    for (const auto& f : doc.functions) {
        if (!doc.find_set(f.domain))
            error("ResolveError", f.span, "function '" + f.name + "' has unknown domain '" + f.domain + "'");
        if (auto* ref = std::get_if<SetRef>(&f.codomain); ref && !doc.find_set(ref->set))
            error("ResolveError", f.span, "function '" + f.name + "' maps to unknown set '" + ref->set + "'");
        if (!fn_names.emplace(f.domain, f.name).second)
            error("ResolveError", f.span, "duplicate function '" + f.name + "' on " + f.domain);
    }

    Resolver resolver(doc, diags);

    // Derived functions: the argument is `x`, the domain is inferred from the
    // functions applied to it.
    for (std::size_t i = 0; i < doc.derived.size(); ++i) {
        auto& d = doc.derived[i];
        std::vector<std::string> names;
        for (const auto& p : d.parts) collect_applied_to(*p, "x", names);
        std::vector<std::string> candidates;
        for (const auto& s : doc.sets) {
            bool all = !names.empty();
            for (const auto& n : names) {
                bool found = doc.find_function(s.name, n) != nullptr;
                for (std::size_t j = 0; j < i && !found; ++j)
                    found = doc.derived[j].domain == s.name && doc.derived[j].name == n;
                all = all && found;
            }
            if (all) candidates.push_back(s.name);
        }
        if (candidates.size() != 1) {
            error("ResolveError", d.span,
                  candidates.empty() ? "cannot infer the domain of derived function '" + d.name + "'"
                                     : "domain of derived function '" + d.name + "' is ambiguous");
            continue;
        }
        d.domain = candidates.front();
        if (!fn_names.emplace(d.domain, d.name).second)
            error("ResolveError", d.span, "duplicate function '" + d.name + "' on " + d.domain);
        resolver.set_visible_derived(i);
        Type first{};
        for (auto& p : d.parts) {
            Type t;
            p = resolver.with_var(p, "x", d.domain, t);
            if (t.kind != TypeKind::Int && t.kind != TypeKind::Error && !(t.kind == TypeKind::Text && !d.is_date()))
                error("TypeError", d.span, "derived function '" + d.name + "' must compute a value");
            if (d.is_date() && t.kind != TypeKind::Int && t.kind != TypeKind::Error)
                error("TypeError", d.span, "date components of '" + d.name + "' must be integers");
            if (&p == &d.parts.front()) first = t;
        }
        resolver.record_derived_type(&d, first);
    }
    resolver.set_visible_derived(doc.derived.size());

    // Constraints: ids, name references, formulas.
    std::set<std::string> ids;
    for (std::size_t i = 0; i < doc.constraints.size(); ++i) {
        auto& c = doc.constraints[i];
        if (c.id.empty()) c.id = "C" + std::to_string(i + 1);
        if (!ids.insert(c.id).second) error("ResolveError", c.span, "duplicate constraint id '" + c.id + "'");
        auto known = [&](const std::string& n) {
            if (doc.domains_of(n).empty()) error("ResolveError", c.span, "unknown function '" + n + "'");
        };
        std::visit(
            [&](auto& body) {
                using T = std::decay_t<decltype(body)>;
                if constexpr (std::is_same_v<T, InjectiveDecl> || std::is_same_v<T, AcyclicDecl>) {
                    for (const auto& n : body.functions) known(n);
                } else if constexpr (std::is_same_v<T, ExistenceDecl>) {
                    known(body.if_known);
                    known(body.then_known);
                } else {
                    if (auto resolved = resolver.closed_formula(body.formula)) body.formula = resolved;
                }
            },
            c.body);
    }

    // Datalog rules.
    std::map<std::string, std::size_t> arity;
    for (const auto& r : doc.rules) {
        if (doc.find_set(r.head)) error("ResolveError", r.span, "rule head '" + r.head + "' collides with a set");
        auto [it, fresh] = arity.emplace(r.head, r.head_args.size());
        if (!fresh && it->second != r.head_args.size())
            error("ArityError", r.span, "predicate '" + r.head + "' used with inconsistent arity");
    }
    for (const auto& r : doc.rules) {
        std::set<std::string> body_vars;
        for (const auto& a : r.body) {
            if (doc.find_set(a.predicate)) {
                const std::size_t columns = 1 + [&] {
                    std::size_t n = 0;
                    for (const auto& f : doc.functions)
                        if (f.domain == a.predicate && f.name != "x") ++n;
                    return n;
                }();
                for (std::size_t k = 0; k < a.args.size(); ++k) {
                    const auto& arg = a.args[k];
                    if (arg.field) {
                        if (*arg.field != "x" && !doc.find_function(a.predicate, *arg.field))
                            error("ResolveError", a.span,
                                  "'" + *arg.field + "' is not a stored function of " + a.predicate);
                    } else if (k >= columns) {
                        error("ArityError", a.span, "too many positional arguments for " + a.predicate);
                    }
                }
            } else if (auto it = arity.find(a.predicate); it != arity.end()) {
                for (const auto& arg : a.args)
                    if (arg.field)
                        error("ResolveError", a.span, "derived predicate '" + a.predicate + "' has no named fields");
                if (a.args.size() != it->second)
                    error("ArityError", a.span, "predicate '" + a.predicate + "' expects " +
                                                    std::to_string(it->second) + " arguments");
            } else {
                error("ResolveError", a.span, "unknown predicate '" + a.predicate + "'");
            }
            for (const auto& arg : a.args)
                if (auto* v = std::get_if<DatalogVar>(&arg.term)) body_vars.insert(v->name);
        }
        for (const auto& v : r.head_args)
            if (!body_vars.count(v))
                error("UnboundVarError", r.span, "head variable '" + v + "' does not occur in the rule body");
    }
}

}  // namespace

ParseResult parse_schema(std::string_view text) {
    ParseResult result;
    auto tokens = detail::lex(text, result.diagnostics);
    Parser parser(std::move(tokens), result.diagnostics);
    SchemaDoc doc = parser.parse_document();
    if (!has_errors(result.diagnostics)) resolve_document(doc, result.diagnostics);
    if (!has_errors(result.diagnostics)) {
        doc.source_digest = digest_text(text);
        result.doc = std::move(doc);
    }
    return result;
}

FormulaResult parse_formula(std::string_view text, const SchemaDoc& context) {
    FormulaResult result;
    auto tokens = detail::lex(text, result.diagnostics);
    if (has_errors(result.diagnostics)) return result;
    Parser parser(std::move(tokens), result.diagnostics);
    ExprPtr raw = parser.parse_standalone_formula();
    if (!raw) return result;
    Resolver resolver(context, result.diagnostics);
    ExprPtr resolved = resolver.closed_formula(raw);
    if (!has_errors(result.diagnostics)) result.formula = resolved;
    return result;
}

}  // namespace emdm
