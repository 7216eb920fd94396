#include <sstream>

#include "emdm/parser.hpp"

namespace emdm {

namespace {

// Binding strength, loosest first; mirrors the parser's precedence ladder.
enum Prec { kQuant = 0, kImplies, kOr, kAnd, kNot, kCompare, kMember, kAdd, kPrimary };

int precedence(const Expr& e) {
    switch (e.kind) {
        case ExprKind::Forall:
        case ExprKind::Exists: return kQuant;
        case ExprKind::Implies: return kImplies;
        case ExprKind::Or: return kOr;
        case ExprKind::And: return kAnd;
        case ExprKind::Not: return kNot;
        case ExprKind::Compare: return kCompare;
        case ExprKind::InNulls:
        case ExprKind::NotInNulls:
        case ExprKind::InSet: return kMember;
        case ExprKind::Arith: return kAdd;
        default: return kPrimary;
    }
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        if (c == '\n') {
            out += "\\n";
            continue;
        }
        if (c == '\t') {
            out += "\\t";
            continue;
        }
        out.push_back(c);
    }
    return out + "\"";
}

std::string literal(const Literal& l) {
    if (auto* i = std::get_if<std::int64_t>(&l)) return std::to_string(*i);
    return quote(std::get<std::string>(l));
}

const char* compare_symbol(CompareOp op) {
    switch (op) {
        case CompareOp::Eq: return "=";
        case CompareOp::Ne: return "<>";
        case CompareOp::Lt: return "<";
        case CompareOp::Le: return "<=";
        case CompareOp::Gt: return ">";
        case CompareOp::Ge: return ">=";
    }
    return "?";
}

void emit(std::ostream& os, const Expr& e);

// `a < b and b <= c` is printed back as the chain `a < b <= c` it came from.
bool is_chain(const Expr& e);

const Expr& chain_tail(const Expr& e) {
    return e.kind == ExprKind::Compare ? *e.operands[1] : *e.operands[1]->operands[1];
}

bool is_chain(const Expr& e) {
    if (e.kind == ExprKind::Compare) return true;
    return e.kind == ExprKind::And && e.operands[1]->kind == ExprKind::Compare && is_chain(*e.operands[0]) &&
           structurally_equal(chain_tail(*e.operands[0]), *e.operands[1]->operands[0]);
}

void emit_at(std::ostream& os, const Expr& e, int min_prec) {
    if (precedence(e) < min_prec) {
        os << '(';
        emit(os, e);
        os << ')';
    } else {
        emit(os, e);
    }
}

void emit(std::ostream& os, const Expr& e) {
    switch (e.kind) {
        case ExprKind::Forall:
        case ExprKind::Exists: {
            os << (e.kind == ExprKind::Forall ? "forall " : "exists ");
            for (std::size_t i = 0; i < e.vars.size(); ++i) os << (i ? ", " : "") << e.vars[i];
            os << " in " << e.name << ": ";
            emit(os, *e.operands[0]);
            break;
        }
        case ExprKind::Implies:
            emit_at(os, *e.operands[0], kOr);
            os << " => ";
            emit(os, *e.operands[1]);
            break;
        case ExprKind::Or:
            emit_at(os, *e.operands[0], kOr);
            os << " or ";
            emit_at(os, *e.operands[1], kAnd);
            break;
        case ExprKind::And:
            if (is_chain(e)) {
                const Expr& last = *e.operands[1];
                emit(os, *e.operands[0]);
                os << ' ' << compare_symbol(last.cmp) << ' ';
                emit_at(os, *last.operands[1], kMember);
                break;
            }
            emit_at(os, *e.operands[0], kAnd);
            os << " and ";
            emit_at(os, *e.operands[1], kNot);
            break;
        case ExprKind::Not:
            os << "not ";
            emit_at(os, *e.operands[0], kNot);
            break;
        case ExprKind::Compare:
            emit_at(os, *e.operands[0], kMember);
            os << ' ' << compare_symbol(e.cmp) << ' ';
            emit_at(os, *e.operands[1], kMember);
            break;
        case ExprKind::Arith:
            emit_at(os, *e.operands[0], kAdd);
            os << (e.arith == ArithOp::Add ? " + " : " - ");
            emit_at(os, *e.operands[1], kPrimary);
            break;
        case ExprKind::Apply:
            os << e.name << '(';
            for (std::size_t i = 0; i < e.operands.size(); ++i) {
                if (i) os << ", ";
                emit(os, *e.operands[i]);
            }
            os << ')';
            break;
        case ExprKind::Var: os << e.name; break;
        case ExprKind::IntLit: os << e.int_value; break;
        case ExprKind::StrLit: os << quote(e.str_value); break;
        case ExprKind::IsNullCoalesce:
            os << "isNull(";
            emit(os, *e.operands[0]);
            os << ", ";
            emit(os, *e.operands[1]);
            os << ')';
            break;
        case ExprKind::InNulls:
        case ExprKind::NotInNulls:
            emit_at(os, *e.operands[0], kAdd);
            os << (e.kind == ExprKind::InNulls ? " in NULLS" : " not in NULLS");
            break;
        case ExprKind::InSet:
            emit_at(os, *e.operands[0], kAdd);
            os << " in {";
            for (std::size_t i = 0; i < e.literals.size(); ++i) os << (i ? ", " : "") << literal(e.literals[i]);
            os << '}';
            break;
        case ExprKind::CurrentYear: os << "CurrentYear()"; break;
    }
}

std::string render_bound(const Bound& b) {
    if (auto* i = std::get_if<std::int64_t>(&b)) return std::to_string(*i);
    return "CurrentYear()";
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
    return out;
}

std::string render_body(const ConstraintDecl& c, bool with_id) {
    return std::visit(
        [&](const auto& body) -> std::string {
            using T = std::decay_t<decltype(body)>;
            if constexpr (std::is_same_v<T, InjectiveDecl>) {
                return "INJECTIVE " + join(body.functions, " * ");
            } else if constexpr (std::is_same_v<T, AcyclicDecl>) {
                return "ACYCLIC " + join(body.functions, ", ");
            } else if constexpr (std::is_same_v<T, ExistenceDecl>) {
                return "EXISTENCE " + body.if_known + " |- " + body.then_known;
            } else {
                std::string head = body.temporal ? "ALWAYS CONSTRAINT" : "CONSTRAINT";
                if (with_id && !c.id.empty()) head += " " + c.id;
                return head + ": " + render_formula(*body.formula);
            }
        },
        c.body);
}

}  // namespace

std::string render_formula(const Expr& e) {
    std::ostringstream os;
    emit(os, e);
    return os.str();
}

std::string render_domain(const ValueDomain& d) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, NaturalBits>) {
                return "NAT(" + std::to_string(v.bits) + ")";
            } else if constexpr (std::is_same_v<T, UnicodeText>) {
                return "UNICODE(" + std::to_string(v.max_len) + ")";
            } else if constexpr (std::is_same_v<T, EnumChars>) {
                std::vector<std::string> q;
                for (const auto& s : v.values) q.push_back(quote(s));
                return "{" + join(q, ", ") + "}";
            } else {
                return "[" + render_bound(v.lo) + ", " + render_bound(v.hi) + "]";
            }
        },
        d);
}

std::string render_constraint(const ConstraintDecl& c) { return render_body(c, true); }

std::string render_schema(const SchemaDoc& doc) {
    std::ostringstream os;
    for (const auto& s : doc.sets) os << "SET " << s.name << '\n';
    for (const auto& f : doc.functions) {
        os << f.name << " : " << f.domain << (f.is_key ? " <-> " : " -> ");
        if (auto* ref = std::get_if<SetRef>(&f.codomain))
            os << ref->set;
        else
            os << render_domain(std::get<ValueDomain>(f.codomain));
        if (f.nullable) os << " | NULLS";
        os << '\n';
    }
    for (const auto& d : doc.derived) {
        os << d.name << " :=";
        for (std::size_t i = 0; i < d.parts.size(); ++i) os << (i ? " * " : " ") << render_formula(*d.parts[i]);
        os << '\n';
    }
    for (std::size_t i = 0; i < doc.constraints.size(); ++i) {
        const auto& c = doc.constraints[i];
        os << render_body(c, c.id != "C" + std::to_string(i + 1)) << '\n';
    }
    for (const auto& r : doc.rules) {
        os << r.head << '(' << join(r.head_args, ", ") << ") <- ";
        for (std::size_t i = 0; i < r.body.size(); ++i) {
            const auto& a = r.body[i];
            os << (i ? ", " : "") << a.predicate << '(';
            for (std::size_t j = 0; j < a.args.size(); ++j) {
                const auto& arg = a.args[j];
                if (j) os << ", ";
                if (arg.field) os << *arg.field << '=';
                if (auto* v = std::get_if<DatalogVar>(&arg.term))
                    os << v->name;
                else
                    os << literal(std::get<Literal>(arg.term));
            }
            os << ')';
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace emdm
