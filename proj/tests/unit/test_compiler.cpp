#include <gtest/gtest.h>

#include <algorithm>
#include <functional>

#include "emdm/compiler.hpp"
#include "fixtures.hpp"

using namespace emdm;
using emdm::testing::corpus;
using emdm::testing::corpus_path;
using emdm::testing::read_text;

namespace {

using Scope = std::set<std::pair<std::string, std::string>>;

SchemaDoc parse_ok(std::string_view text) {
    ParseResult r = parse_schema(text);
    if (!r.doc) throw std::runtime_error("parse failed");
    return *r.doc;
}

std::vector<std::string> warnings(const std::vector<Diagnostic>& ds) {
    std::vector<std::string> out;
    for (const auto& d : ds)
        if (d.severity == Severity::Warning) out.push_back(d.code);
    return out;
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

// Every function application in the syntax tree, with derived functions
// expanded into what they read.
Scope apply_walk(const Expr& e, const SchemaDoc& doc) {
    Scope out;
    std::function<void(const Expr&)> walk = [&](const Expr& n) {
        if (n.kind == ExprKind::Apply) {
            if (const DerivedFunction* d = doc.find_derived(n.domain, n.name)) {
                for (const auto& p : d->parts) walk(*p);
            } else {
                out.emplace(n.domain, n.name);
            }
        }
        for (const auto& k : n.operands) walk(*k);
    };
    walk(e);
    return out;
}

const ConstraintDecl& decl(const SchemaDoc& doc, const std::string& id) {
    for (const auto& c : doc.constraints)
        if (c.id == id) return c;
    throw std::runtime_error("no constraint " + id);
}

}  // namespace

TEST(Compile, CorpusStats) {
    const SchemaStats s = schema_stats(*corpus());
    EXPECT_EQ(s.tables, 5);
    EXPECT_EQ(s.foreign_keys, 8);
    EXPECT_EQ(s.unique_keys, 13);
    EXPECT_EQ(s.datalog_rules, 12);
    EXPECT_EQ(s.compiled_constraints, 40);
}

TEST(Compile, ForeignKeysAreTheReferenceColumns) {
    std::set<std::string> fks;
    for (const auto& t : corpus()->tables)
        for (const auto& fk : t.foreign_keys) {
            fks.insert(t.name + "." + t.columns[static_cast<std::size_t>(fk.column)].name);
            EXPECT_EQ(corpus()->tables[static_cast<std::size_t>(fk.target)].columns[0].name, "x");
        }
    EXPECT_EQ(fks, (std::set<std::string>{"PERSONS.Mother", "PERSONS.Father", "MARRIAGES.Husband", "MARRIAGES.Wife",
                                          "COUNTRIES.CurrentCountry", "REIGNS.Ruler", "REIGNS.Country",
                                          "REIGNS.Title"}));
}

TEST(Compile, UniqueKeys) {
    std::set<std::string> keys;
    for (const auto& t : corpus()->tables)
        for (const auto& k : t.unique_keys) {
            std::string name = t.name + ":";
            for (const auto& p : k.parts)
                name += (p.column >= 0 ? t.columns[static_cast<std::size_t>(p.column)].name
                                       : t.derived[static_cast<std::size_t>(p.derived)].name) +
                        "*";
            keys.insert(name);
        }
    EXPECT_EQ(keys, (std::set<std::string>{"PERSONS:x*", "MARRIAGES:x*", "COUNTRIES:x*", "TITLES:x*", "REIGNS:x*",
                                           "COUNTRIES:Country*", "TITLES:Title*", "PERSONS:Mother*Name*",
                                           "PERSONS:Father*Name*", "MARRIAGES:Husband*Wife*MarriageYear*",
                                           "MARRIAGES:Husband*Wife*DivorceYear*",
                                           "REIGNS:Ruler*Country*FromDate*", "REIGNS:Ruler*Country*ToDate*"}));
}

TEST(Compile, SurrogateFirstAndNamesPreserved) {
    const std::string source = read_text(corpus_path());
    for (const auto& t : corpus()->tables) {
        ASSERT_FALSE(t.columns.empty());
        EXPECT_EQ(t.columns[0].name, "x");
        EXPECT_TRUE(t.columns[0].is_key);
        for (const auto& c : t.columns) EXPECT_NE(source.find(c.name), std::string::npos) << c.name;
    }
    EXPECT_EQ(corpus()->table("PERSONS").column_index("Mother"), 3);
}

TEST(Compile, ConstraintKinds) {
    const CompiledSchema& s = *corpus();
    EXPECT_EQ(s.find_constraint("C1")->kind, ConstraintKind::RowLocal);
    EXPECT_EQ(s.find_constraint("C2")->kind, ConstraintKind::Acyclicity);
    EXPECT_EQ(s.find_constraint("C3")->kind, ConstraintKind::CrossRow);
    EXPECT_EQ(s.find_constraint("C8")->kind, ConstraintKind::Uniqueness);
    EXPECT_EQ(s.find_constraint("C15")->kind, ConstraintKind::CrossTable);
    EXPECT_EQ(s.find_constraint("C25")->kind, ConstraintKind::Existence);
    EXPECT_EQ(s.find_constraint("C33")->kind, ConstraintKind::Temporal);
    int implicit = 0;
    for (const auto& c : s.constraints) implicit += c.implicit;
    EXPECT_EQ(implicit, 7);
}

TEST(Compile, TwoVariableConstraintsAreSymmetric) {
    const CompiledSchema& s = *corpus();
    for (const char* id : {"C19", "C30", "C31"}) EXPECT_TRUE(s.find_constraint(id)->symmetric) << id;
    EXPECT_FALSE(s.find_constraint("C3")->symmetric);
}

TEST(Compile, DisplayText) {
    EXPECT_EQ(corpus()->find_constraint("C1")->display_text,
              "forall x in PERSONS: Sex(x) <> \"N\" => 0 <= Age(x) <= 140");
    EXPECT_EQ(corpus()->find_constraint("C2")->display_text, "Mother\u00b7Father graph is acyclic");
    EXPECT_EQ(corpus()->find_constraint("C3")->display_text, "forall x in PERSONS: Sex(Mother(x)) = \"F\"");
}

TEST(Compile, MissingSurrogateAdded) {
    CompileResult r = compile_source("SET THINGS\n");
    ASSERT_TRUE(r.schema);
    EXPECT_EQ(schema_stats(*r.schema), (SchemaStats{1, 0, 1, 1, 0}));
    EXPECT_EQ(r.schema->tables[0].columns[0].name, "x");
    EXPECT_TRUE(contains(warnings(r.diagnostics), "MissingSurrogate"));
}

TEST(Compile, EmptySchema) {
    CompileResult r = compile_source("");
    ASSERT_TRUE(r.schema);
    EXPECT_EQ(schema_stats(*r.schema), SchemaStats{});
}

TEST(Compile, PersonsSubschema) {
    std::string text = read_text(corpus_path());
    text = text.substr(0, text.find("SET MARRIAGES"));
    CompileResult r = compile_source(text);
    ASSERT_TRUE(r.schema);
    const SchemaStats s = schema_stats(*r.schema);
    EXPECT_EQ(s.tables, 1);
    EXPECT_EQ(s.foreign_keys, 2);
    EXPECT_EQ(s.unique_keys, 1);
}

TEST(Compile, AcyclicOverNonSelfMap) {
    CompileResult r = compile_source("SET A\nSET B\nf : A -> B | NULLS\nACYCLIC f\n");
    EXPECT_FALSE(r.schema);
    EXPECT_TRUE(has_errors(r.diagnostics));
    EXPECT_EQ(r.diagnostics.front().code, "CompileError");
}

TEST(Compile, ExistenceAcrossDomains) {
    CompileResult r = compile_source("SET A\nSET B\nf : A -> NAT(8) | NULLS\ng : B -> NAT(8) | NULLS\nEXISTENCE f |- g\n");
    EXPECT_FALSE(r.schema);
    EXPECT_EQ(r.diagnostics.front().code, "CompileError");
}

TEST(Lint, NaturalKeyDemoted) {
    CompileResult r = compile_source("SET TITLES\nTitle : TITLES <-> UNICODE(32)\n");
    ASSERT_TRUE(r.schema);
    EXPECT_TRUE(contains(warnings(r.diagnostics), "NaturalKeyDemoted"));
    const TableDef& t = r.schema->tables[0];
    EXPECT_EQ(t.columns[0].name, "x");
    EXPECT_EQ(t.unique_keys.size(), 2u);
}

TEST(Lint, DuplicateConstraint) {
    const auto ws = lint_meta_axioms(parse_ok(
        "SET M\nA : M -> NAT(8)\nB : M -> NAT(8)\n"
        "CONSTRAINT: forall x in M: A(x) <= B(x)\nCONSTRAINT: forall x in M: A(x) <= B(x)\n"));
    EXPECT_TRUE(contains(warnings(ws), "DuplicateConstraint"));
}

TEST(Lint, ImpliedConstraintNotFlagged) {
    std::string text = read_text(corpus_path());
    text += "\nCONSTRAINT: forall x in MARRIAGES: Wife(x) <> Husband(x)\n";
    EXPECT_FALSE(contains(warnings(lint_meta_axioms(parse_ok(text))), "DuplicateConstraint"));
}

TEST(Lint, NaturalKeyReference) {
    const auto ws = lint_meta_axioms(parse_ok(
        "SET TITLES\nx : TITLES <-> NAT(8)\nTitle : TITLES <-> UNICODE(32)\n"
        "SET REIGNS\nx : REIGNS <-> NAT(8)\nTitle : REIGNS -> UNICODE(32)\n"));
    EXPECT_TRUE(contains(warnings(ws), "NaturalKeyReference"));
}

TEST(Lint, CorpusWarnings) {
    const auto ws = warnings(lint_meta_axioms(parse_ok(read_text(corpus_path()))));
    EXPECT_EQ(std::count(ws.begin(), ws.end(), "MissingSurrogate"), 2);
    EXPECT_EQ(std::count(ws.begin(), ws.end(), "NaturalKeyDemoted"), 2);
    EXPECT_FALSE(contains(ws, "DuplicateConstraint"));
}

TEST(Scope, MotherSex) {
    const SchemaDoc& doc = *corpus()->doc;
    EXPECT_EQ(dependency_scope(decl(doc, "C3"), doc), (Scope{{"PERSONS", "Mother"}, {"PERSONS", "Sex"}}));
}

TEST(Scope, MarriageAliveReadsPersons) {
    const SchemaDoc& doc = *corpus()->doc;
    const Scope s = dependency_scope(decl(doc, "C15"), doc);
    for (const auto& p : Scope{{"MARRIAGES", "Husband"},
                               {"MARRIAGES", "Wife"},
                               {"MARRIAGES", "MarriageYear"},
                               {"PERSONS", "BirthYear"},
                               {"PERSONS", "PassedAwayYear"}})
        EXPECT_TRUE(s.count(p)) << p.first << "." << p.second;
}

TEST(Scope, CoRuleSpansThreeTables) {
    const SchemaDoc& doc = *corpus()->doc;
    std::set<std::string> tables;
    for (const auto& [t, c] : dependency_scope(decl(doc, "C30"), doc)) tables.insert(t);
    EXPECT_EQ(tables, (std::set<std::string>{"REIGNS", "PERSONS", "MARRIAGES"}));
}

TEST(Scope, NoApplications) {
    const SchemaDoc doc = parse_ok("SET A\nCONSTRAINT: forall x in A: 1 <= 2\n");
    EXPECT_TRUE(dependency_scope(doc.constraints[0], doc).empty());
}

TEST(Scope, MatchesSyntaxTreeWalk) {
    const SchemaDoc& doc = *corpus()->doc;
    for (const auto& c : doc.constraints) {
        const auto* f = std::get_if<FormulaDecl>(&c.body);
        if (!f) continue;
        EXPECT_EQ(dependency_scope(c, doc), apply_walk(*f->formula, doc)) << c.id;
    }
}

TEST(Scope, StructuralConstraintsReadTheirFunctions) {
    const SchemaDoc& doc = *corpus()->doc;
    EXPECT_EQ(dependency_scope(decl(doc, "C2"), doc), (Scope{{"PERSONS", "Mother"}, {"PERSONS", "Father"}}));
    const Scope reigns = dependency_scope(decl(doc, "C22"), doc);
    for (const char* col : {"Ruler", "Country", "FromYear", "FromMonth", "FromDay"})
        EXPECT_TRUE(reigns.count({"REIGNS", col})) << col;
}

TEST(Compile, DigestStableAndSensitive) {
    const std::string text = read_text(corpus_path());
    EXPECT_EQ(compile_source(text).schema->digest, corpus()->digest);
    EXPECT_NE(compile_source(text + "\n# edit\n").schema->digest, corpus()->digest);
}
