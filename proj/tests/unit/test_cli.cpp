#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "emdm/cli.hpp"
#include "fixtures.hpp"

using namespace emdm;
using namespace emdm::testing;

namespace {

struct CliRun {
    int code = 0;
    std::string out, err;
};

CliRun cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir = std::filesystem::temp_directory_path() /
              ("emdm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        std::filesystem::remove_all(dir);
        std::filesystem::create_directories(dir);
        store = (dir / "db.json").string();
    }
    void TearDown() override { std::filesystem::remove_all(dir); }

    std::string write(const std::string& name, const std::string& text) const {
        const auto p = dir / name;
        std::ofstream(p, std::ios::binary) << text;
        return p.string();
    }

    std::vector<std::string> with_store(std::vector<std::string> args) const {
        args.insert(args.end(), {"--schema", corpus_path(), "--store", store, "--clock-year", "2026"});
        return args;
    }

    std::filesystem::path dir;
    std::string store;
};

const std::string kFamilyCsv = std::string(EMDM_CORPUS_DIR) + "/family/persons.csv";

}  // namespace

TEST_F(Cli, CheckPrintsCounts) {
    const CliRun r = cli({"check", corpus_path()});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "26 functions, 33 constraints, 12 rules\n");
}

TEST_F(Cli, CheckReportsDiagnosticsWithLocation) {
    const std::string bad = write("bad.emdm", "SET A\nName : A -> B\n");
    const CliRun r = cli({"check", bad});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("bad.emdm:2:"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("ResolveError"), std::string::npos) << r.err;
}

TEST_F(Cli, CheckJson) {
    const CliRun r = cli({"check", corpus_path(), "--format", "json"});
    EXPECT_EQ(r.code, 0);
    const auto doc = nlohmann::json::parse(r.out);
    EXPECT_EQ(doc["counts"]["rules"], 12);
    EXPECT_TRUE(doc["ok"]);
}

TEST_F(Cli, CompilePrintsStats) {
    const CliRun r = cli({"compile", corpus_path()});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "5 tables, 8 foreign keys, 13 unique keys, 40 compiled constraints, 12 rules\n");
    EXPECT_NE(r.err.find("MissingSurrogate"), std::string::npos);
}

TEST_F(Cli, InitImportValidateClosure) {
    EXPECT_EQ(cli(with_store({"init"})).code, 0);
    EXPECT_EQ(cli(with_store({"init"})).code, 2);
    EXPECT_EQ(cli(with_store({"init", "--force"})).code, 0);

    const CliRun imp = cli(with_store({"import", "--table", "PERSONS", kFamilyCsv}));
    EXPECT_EQ(imp.code, 0) << imp.out << imp.err;
    EXPECT_EQ(imp.out, "4 accepted, 0 rejected\n");

    const CliRun val = cli(with_store({"validate"}));
    EXPECT_EQ(val.code, 0);
    EXPECT_EQ(val.out, "4 rows, 0 violations\n");

    const CliRun all = cli(with_store({"closure"}));
    EXPECT_EQ(all.code, 0);
    EXPECT_EQ(all.out.substr(0, all.out.find('\n')), "5 pair(s)");

    const CliRun seeded = cli(with_store({"closure", "--seed-id", "7"}));
    EXPECT_EQ(seeded.code, 0);
    EXPECT_EQ(seeded.out, "4 person(s) in closure\n"
                          "-1 (parent)\tAdam, M\n"
                          "-1 (parent)\tEve, F\n"
                          "0 (self)\tCain, M\n"
                          "+1 (child)\tEnoch, M\n");
    EXPECT_EQ(cli(with_store({"closure", "--seed", "cain"})).out, seeded.out);
    EXPECT_EQ(cli(with_store({"closure", "--seed-id", "99"})).code, 2);
    EXPECT_EQ(cli(with_store({"closure", "--seed", "nobody"})).code, 2);
}

TEST_F(Cli, StrictImportRejectsAndLoadsNothing) {
    cli(with_store({"init"}));
    const std::string csv = write("p.csv", "x,Name,Sex,Mother\n1,Dad,M,\n2,Kid,M,1\n");
    const CliRun r = cli(with_store({"import", "--table", "PERSONS", csv}));
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("p.csv:3: C3"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("import aborted"), std::string::npos);
    EXPECT_EQ(cli(with_store({"validate"})).out, "0 rows, 0 violations\n");

    const CliRun rep = cli(with_store({"import", "--table", "PERSONS", "--mode", "report", csv}));
    EXPECT_EQ(rep.code, 1);
    EXPECT_NE(rep.out.find("1 accepted, 1 rejected"), std::string::npos);
}

TEST_F(Cli, ValidateFindsFebruaryThirtieth) {
    Database db(corpus());
    const auto ctx = at_year();
    const auto pepin = must_insert(db, person("Pepin", "M"), ctx);
    const auto aq = must_insert(db, country("Aquitaine"), ctx);
    const int reigns = corpus()->table_index("REIGNS");
    db.mutable_rows(reigns).emplace(
        1, make_row(db, reigns,
                    {{"Ruler", Ref{pepin}}, {"Country", Ref{aq}}, {"FromYear", std::int64_t{817}},
                     {"FromMonth", std::int64_t{2}}, {"FromDay", std::int64_t{30}}, {"ToYear", std::int64_t{838}},
                     {"ToMonth", std::int64_t{12}}, {"ToDay", std::int64_t{13}}},
                    1, ctx));
    db.set_next_id(reigns, 2);
    save_snapshot(db, store);
    const CliRun r = cli(with_store({"validate"}));
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.out.substr(0, 4), "C28 ");
    EXPECT_NE(r.out.find("3 rows, 1 violation\n"), std::string::npos) << r.out;
    const auto doc = nlohmann::json::parse(cli(with_store({"validate", "--format", "json"})).out);
    EXPECT_EQ(doc["violations"].size(), 1u);
    EXPECT_EQ(doc["violations"][0]["constraint"], "C28");
}

TEST_F(Cli, UsageErrors) {
    EXPECT_EQ(cli({}).code, 2);
    EXPECT_EQ(cli({"frobnicate"}).code, 2);
    EXPECT_EQ(cli({"validate"}).code, 2);
    EXPECT_EQ(cli({"check", (dir / "missing.emdm").string()}).code, 2);
    EXPECT_EQ(cli(with_store({"validate"})).code, 2);  // store does not exist yet
    EXPECT_EQ(cli({"import", "--schema", corpus_path(), "--store", store, "--table", "PERSONS"}).code, 2);
    cli(with_store({"init"}));
    EXPECT_EQ(cli(with_store({"import", "--table", "NOPE", kFamilyCsv})).code, 2);
    EXPECT_EQ(cli(with_store({"import", "--table", "PERSONS", "--mode", "lenient", kFamilyCsv})).code, 2);
    EXPECT_EQ(cli({"serve", "--schema", corpus_path(), "--port", "70000"}).code, 2);
}

TEST_F(Cli, HelpSucceeds) {
    const CliRun r = cli({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("validate"), std::string::npos);
}

TEST_F(Cli, DigestMismatchIsAConfigurationError) {
    cli(with_store({"init"}));
    std::string text = read_text(corpus_path()) + "\n# edited\n";
    const std::string edited = write("edited.emdm", text);
    const CliRun r = cli({"validate", "--schema", edited, "--store", store});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("DigestMismatch"), std::string::npos) << r.err;
}
