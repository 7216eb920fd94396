#include "fixtures.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "emdm/parser.hpp"

#ifndef EMDM_CORPUS_DIR
#error "EMDM_CORPUS_DIR must point at the bundled schemas"
#endif

namespace emdm::testing {

std::string corpus_path() { return std::string(EMDM_CORPUS_DIR) + "/genealogies.emdm"; }

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::shared_ptr<const CompiledSchema> corpus() {
    static const std::shared_ptr<const CompiledSchema> schema = [] {
        CompileResult r = compile_source(read_text(corpus_path()));
        if (!r.schema) throw std::runtime_error("corpus does not compile");
        return r.schema;
    }();
    return schema;
}

std::shared_ptr<const CompiledSchema> corpus_without(std::initializer_list<std::string> ids) {
    ParseResult parsed = parse_schema(read_text(corpus_path()));
    if (!parsed.doc) throw std::runtime_error("corpus does not parse");
    const std::set<std::string> drop(ids);
    std::vector<ConstraintDecl> kept;
    for (auto c : parsed.doc->constraints)
        if (!drop.count(c.id)) kept.push_back(std::move(c));
    parsed.doc->constraints = std::move(kept);
    parsed.doc->source_digest = digest_text(render_schema(*parsed.doc));
    CompileResult r = compile(*parsed.doc);
    if (!r.schema) throw std::runtime_error("reduced corpus does not compile");
    return r.schema;
}

EvalContext at_year(std::int64_t year) { return EvalContext::fixed_year(year); }

namespace {

Value opt_int(Opt v) { return v ? Value{*v} : Value{}; }
Value opt_ref(Opt v) { return v ? Value{Ref{*v}} : Value{}; }

}  // namespace

Insert person(const std::string& name, const std::string& sex, Opt mother, Opt father, Opt birth, Opt passed) {
    return Insert{"PERSONS",
                  {{"Name", name},
                   {"Sex", sex},
                   {"Mother", opt_ref(mother)},
                   {"Father", opt_ref(father)},
                   {"BirthYear", opt_int(birth)},
                   {"PassedAwayYear", opt_int(passed)}},
                  {}};
}

Insert marriage(std::int64_t husband, std::int64_t wife, Opt married, Opt divorced) {
    return Insert{"MARRIAGES",
                  {{"Husband", Ref{husband}},
                   {"Wife", Ref{wife}},
                   {"MarriageYear", opt_int(married)},
                   {"DivorceYear", opt_int(divorced)}},
                  {}};
}

Insert country(const std::string& name, Opt current) {
    return Insert{"COUNTRIES", {{"Country", name}, {"CurrentCountry", opt_ref(current)}}, {}};
}

Insert title(const std::string& name) { return Insert{"TITLES", {{"Title", name}}, {}}; }

Insert reign(const ReignSpec& r) {
    return Insert{"REIGNS",
                  {{"Ruler", Ref{r.ruler}},
                   {"Country", Ref{r.country}},
                   {"Title", opt_ref(r.title)},
                   {"FromYear", r.from_year},
                   {"ToYear", opt_int(r.to_year)},
                   {"FromMonth", opt_int(r.from_month)},
                   {"ToMonth", opt_int(r.to_month)},
                   {"FromDay", opt_int(r.from_day)},
                   {"ToDay", opt_int(r.to_day)}},
                  {}};
}

std::string describe(const CheckReport& r) {
    std::string out = r.accepted() ? "accepted" : "rejected";
    for (const auto& v : r.violations) out += "\n  " + v.message;
    return out;
}

std::int64_t must_insert(Database& db, const Insert& w, const EvalContext& ctx) {
    ApplyResult r = apply(db, w, ctx);
    if (!r.report.accepted()) throw std::runtime_error("fixture write rejected: " + describe(r.report));
    db = std::move(r.db);
    return *r.report.assigned_x;
}

void must_apply(Database& db, const WriteOp& w, const EvalContext& ctx) {
    ApplyResult r = apply(db, w, ctx);
    if (!r.report.accepted()) throw std::runtime_error("fixture write rejected: " + describe(r.report));
    db = std::move(r.db);
}

bool violates(const CheckReport& r, const std::string& id) {
    for (const auto& v : r.violations)
        if (v.constraint_id == id) return true;
    return false;
}

Royals royals(std::shared_ptr<const CompiledSchema> schema, const EvalContext& ctx) {
    Royals f{Database(std::move(schema))};
    Database& db = f.db;
    auto add = [&](const Insert& w) { return must_insert(db, w, ctx); };
    f.george_v = add(person("George V", "M", {}, {}, 1865, 1936));
    f.mary = add(person("Mary of Teck", "F", {}, {}, 1867, 1953));
    f.george_vi = add(person("George VI", "M", f.mary, f.george_v, 1895, 1952));
    f.elizabeth_ii = add(person("Elizabeth II", "F", {}, f.george_vi, 1926, 2022));
    f.philip = add(person("Philip", "M", {}, {}, 1921, 2021));
    f.charles = add(person("Charles III, King of UK", "M", f.elizabeth_ii, f.philip, 1948));
    f.diana = add(person("Diana", "F", {}, {}, 1961, 1997));
    f.william = add(person("William", "M", f.diana, f.charles, 1982));
    f.harry = add(person("Harry", "M", f.diana, f.charles, 1984));
    f.catherine = add(person("Catherine", "F", {}, {}, 1982));
    f.george = add(person("George", "M", f.catherine, f.william, 2013));
    f.charlotte = add(person("Charlotte", "F", f.catherine, f.william, 2015));
    f.louis = add(person("Louis", "M", f.catherine, f.william, 2018));
    f.meghan = add(person("Meghan", "F", {}, {}, 1981));
    f.archie = add(person("Archie", "M", f.meghan, f.harry, 2019));
    f.lilibet = add(person("Lilibet", "F", f.meghan, f.harry, 2021));
    f.camilla = add(person("Camilla", "F", {}, {}, 1947));
    f.bowes_lyon = add(person("Elizabeth Bowes-Lyon", "F", {}, {}, 1900, 2002));
    must_apply(db, Update{"PERSONS", f.elizabeth_ii, {{"Mother", Ref{f.bowes_lyon}}}}, ctx);

    f.m_george_mary = add(marriage(f.george_v, f.mary, 1893));
    f.m_elizabeth_philip = add(marriage(f.philip, f.elizabeth_ii, 1947));
    f.m_charles_diana = add(marriage(f.charles, f.diana, 1981, 1996));
    f.m_charles_camilla = add(marriage(f.charles, f.camilla, 2005));
    f.m_william_catherine = add(marriage(f.william, f.catherine, 2011));
    f.m_harry_meghan = add(marriage(f.harry, f.meghan, 2018));

    f.uk = add(country("United Kingdom"));
    f.england = add(country("England", f.uk));
    f.aquitaine = add(country("Aquitaine"));
    f.france = add(country("France"));
    f.king = add(title("King"));
    f.queen = add(title("Queen"));

    f.r_george_v = add(reign({f.george_v, f.uk, f.king, 1910, 1936, 5, 1, 6, 20}));
    f.r_george_vi = add(reign({f.george_vi, f.uk, f.king, 1936, 1952, 12, 2, 11, 6}));
    f.r_elizabeth_ii = add(reign({f.elizabeth_ii, f.uk, f.queen, 1952, 2022, 2, 9, 6, 8}));
    f.r_charles_iii = add(reign({f.charles, f.uk, f.king, 2022, {}, 9, {}, 8, {}}));
    return f;
}

}  // namespace emdm::testing
