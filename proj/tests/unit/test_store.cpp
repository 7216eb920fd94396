#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "emdm/errors.hpp"
#include "emdm/store.hpp"
#include "fixtures.hpp"

using namespace emdm;
using namespace emdm::testing;

namespace {

constexpr int kPersons = 0;

std::filesystem::path temp_dir() {
    auto dir = std::filesystem::temp_directory_path() /
               ("emdm_store_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::vector<std::string> labels(const Listing& l) {
    std::vector<std::string> out;
    for (const auto& r : l.rows) out.push_back(r.label);
    return out;
}

}  // namespace

TEST(Csv, QuotedFieldsAndLines) {
    const auto recs = parse_csv("a,b\n\"x, y\",\"say \"\"hi\"\"\"\n\"two\nlines\",\n");
    ASSERT_EQ(recs.size(), 3u);
    EXPECT_EQ(recs[1].fields[0].text, "x, y");
    EXPECT_TRUE(recs[1].fields[0].quoted);
    EXPECT_EQ(recs[1].fields[1].text, "say \"hi\"");
    EXPECT_EQ(recs[2].line, 3u);
    EXPECT_EQ(recs[2].fields[0].text, "two\nlines");
    EXPECT_EQ(recs[2].fields[1].text, "");
    EXPECT_FALSE(recs[2].fields[1].quoted);
}

TEST(Csv, CrlfAndMissingFinalNewline) {
    const auto recs = parse_csv("a,b\r\n1,2");
    ASSERT_EQ(recs.size(), 2u);
    EXPECT_EQ(recs[1].fields[1].text, "2");
}

TEST(Csv, MalformedInputThrows) {
    EXPECT_THROW(parse_csv("a\n\"open"), FormatError);
    EXPECT_THROW(parse_csv("a\n\"x\"y"), FormatError);
    EXPECT_THROW(parse_csv("a\nx\"y"), FormatError);
}

TEST(Import, FamilyFile) {
    const Database empty(corpus());
    const std::string csv = read_text(std::string(EMDM_CORPUS_DIR) + "/family/persons.csv");
    ImportResult r = bulk_import(empty, "PERSONS", csv, at_year(), ImportMode::Strict);
    EXPECT_FALSE(r.aborted);
    EXPECT_EQ(r.accepted, 4u);
    EXPECT_EQ(r.db.rows(kPersons).size(), 4u);
    EXPECT_EQ(r.db.next_id(kPersons), 9);
    EXPECT_EQ(row_label(r.db, kPersons, 7, at_year()), "Cain, M");
}

TEST(Import, ForwardReferencesWithinBatch) {
    const Database empty(corpus());
    const char* csv = "x,Name,Sex,Father\n1,Son,M,2\n2,Dad,M,\n";
    ImportResult r = bulk_import(empty, "PERSONS", csv, at_year(), ImportMode::Strict);
    EXPECT_FALSE(r.aborted);
    EXPECT_EQ(r.accepted, 2u);
}

TEST(Import, StrictAbortsWholeBatch) {
    const Database empty(corpus());
    const char* csv = "x,Name,Sex,Mother\n1,Dad,M,\n2,Kid,M,1\n3,Other,F,\n";
    ImportResult r = bulk_import(empty, "PERSONS", csv, at_year(), ImportMode::Strict);
    EXPECT_TRUE(r.aborted);
    EXPECT_EQ(r.accepted, 0u);
    EXPECT_EQ(r.db.total_rows(), 0u);
    ASSERT_EQ(r.rows.size(), 3u);
    EXPECT_EQ(r.rows[1].line, 3u);
    EXPECT_FALSE(r.rows[1].violations.empty());
    EXPECT_EQ(r.rows[1].violations.front().constraint_id, "C3");
}

TEST(Import, ReportModeKeepsGoodRows) {
    const Database empty(corpus());
    const char* csv = "x,Name,Sex,Mother,BirthYear\n1,Dad,M,,1950\n2,Kid,M,1,1980\n3,Other,F,,1880\n4,Bad,Q,,\n"
                      "5,Late,F,,abc\n";
    ImportResult r = bulk_import(empty, "PERSONS", csv, at_year(), ImportMode::Report);
    EXPECT_FALSE(r.aborted);
    EXPECT_EQ(r.accepted, 1u);
    EXPECT_EQ(r.rejected, 4u);
    EXPECT_TRUE(r.rows[0].accepted);
    EXPECT_FALSE(r.rows[1].accepted);
    EXPECT_FALSE(r.rows[2].accepted);  // 146 years old and alive
    EXPECT_FALSE(r.rows[3].error.empty());
    EXPECT_FALSE(r.rows[4].error.empty());
    EXPECT_EQ(r.db.rows(kPersons).size(), 1u);
    EXPECT_TRUE(check_all(r.db, at_year()).accepted());
}

TEST(Import, ReportModeMatchesRowByRowLoad) {
    const Database empty(corpus());
    const char* csv = "x,Name,Sex,Mother\n1,Ann,F,\n2,Bo,M,1\n3,Bo,M,1\n4,Cy,M,3\n";
    ImportResult r = bulk_import(empty, "PERSONS", csv, at_year(), ImportMode::Report);
    EXPECT_TRUE(r.rows[0].accepted);
    EXPECT_TRUE(r.rows[1].accepted);
    EXPECT_FALSE(r.rows[2].accepted);  // second Bo of Ann
    EXPECT_FALSE(r.rows[3].accepted);  // mother dropped with row 3
}

TEST(Import, QuotedEmptyIsEmptyText) {
    const Database empty(corpus());
    ImportResult r = bulk_import(empty, "PERSONS", "x,Name,Sex\n1,\"\",N\n", at_year(), ImportMode::Strict);
    ASSERT_FALSE(r.aborted);
    EXPECT_EQ(std::get<std::string>(r.db.find(kPersons, 1)->values[1]), "");
    ImportResult n = bulk_import(empty, "PERSONS", "x,Name,Sex\n1,,N\n", at_year(), ImportMode::Report);
    EXPECT_EQ(n.accepted, 0u);
}

TEST(Import, HeaderErrors) {
    const Database empty(corpus());
    const auto ctx = at_year();
    EXPECT_THROW(bulk_import(empty, "PERSONS", "", ctx, ImportMode::Strict), FormatError);
    EXPECT_THROW(bulk_import(empty, "PERSONS", "Name,Sex\nA,F\n", ctx, ImportMode::Strict), FormatError);
    EXPECT_THROW(bulk_import(empty, "PERSONS", "x,Nope\n1,2\n", ctx, ImportMode::Strict), FormatError);
    EXPECT_THROW(bulk_import(empty, "PERSONS", "x,Age\n1,2\n", ctx, ImportMode::Strict), FormatError);
    EXPECT_THROW(bulk_import(empty, "PERSONS", "x,x\n1,1\n", ctx, ImportMode::Strict), FormatError);
    EXPECT_THROW(bulk_import(empty, "PERSONS", "x,Name\n1\n", ctx, ImportMode::Strict), FormatError);
    EXPECT_THROW(bulk_import(empty, "NOPE", "x\n1\n", ctx, ImportMode::Strict), UnknownTable);
}

TEST(Import, ExistingViolationsAreNotBlamedOnTheBatch) {
    Database db(corpus());
    auto& rows = db.mutable_rows(kPersons);
    Row bad = make_row(db, kPersons, {{"Name", std::string("Ghost")}, {"Sex", std::string("F")}, {"BirthYear", std::int64_t{1700}}},
                       1, at_year());
    rows.emplace(1, std::move(bad));
    db.set_next_id(kPersons, 2);
    ImportResult r = bulk_import(db, "PERSONS", "x,Name,Sex\n2,Fresh,M\n", at_year(), ImportMode::Strict);
    EXPECT_FALSE(r.aborted);
    EXPECT_EQ(r.accepted, 1u);
}

TEST(Snapshot, RoundTripIsByteStable) {
    const Royals r = royals();
    const std::string a = snapshot_json(r.db);
    const Database back = parse_snapshot(a, corpus());
    EXPECT_TRUE(back == r.db);
    EXPECT_EQ(snapshot_json(back), a);
    EXPECT_EQ(back.next_id(kPersons), r.db.next_id(kPersons));
}

TEST(Snapshot, UnicodeSurvives) {
    Database db(corpus());
    must_insert(db, person("Ștefan cel Mare", "M", {}, {}, 1433, 1504), at_year());
    const Database back = parse_snapshot(snapshot_json(db), corpus());
    EXPECT_EQ(row_label(back, kPersons, 1, at_year()), "Ștefan cel Mare, M (b. 1433, p. 1504)");
}

TEST(Snapshot, DigestMismatch) {
    const std::string text = snapshot_json(royals().db);
    EXPECT_THROW(parse_snapshot(text, corpus_without({"C1"})), DigestMismatch);
}

TEST(Snapshot, CorruptInputs) {
    const auto s = corpus();
    EXPECT_THROW(parse_snapshot("{not json", s), CorruptSnapshot);
    EXPECT_THROW(parse_snapshot("[]", s), CorruptSnapshot);
    std::string text = snapshot_json(royals().db);
    const auto at = text.find("1865");
    ASSERT_NE(at, std::string::npos);
    text.replace(at, 4, "\"x\"");
    EXPECT_THROW(parse_snapshot(text, s), CorruptSnapshot);
}

TEST(Snapshot, SaveIsAtomicAndLoadable) {
    const auto dir = temp_dir();
    const auto path = dir / "db.json";
    const Royals r = royals();
    save_snapshot(r.db, path);
    save_snapshot(r.db, path);
    EXPECT_TRUE(load_snapshot(path, corpus()) == r.db);
    for (const auto& e : std::filesystem::directory_iterator(dir)) EXPECT_EQ(e.path().filename(), "db.json");
    EXPECT_THROW(load_snapshot(dir / "missing.json", corpus()), IoError);
    std::filesystem::remove_all(dir);
}

TEST(Labels, Persons) {
    Database db(corpus());
    const auto ctx = at_year();
    const auto c = must_insert(db, person("Charles III, King of UK", "M", {}, {}, 1948), ctx);
    const auto a = must_insert(db, person("Adam Racz de Galgo", "M", {}, {}, {}, 1609), ctx);
    const auto i = must_insert(db, person("Ilona Zrinyi", "F"), ctx);
    const auto e = must_insert(db, person("Elizabeth II", "F", {}, {}, 1926, 2022), ctx);
    EXPECT_EQ(row_label(db, kPersons, c, ctx), "Charles III, King of UK, M (b. 1948)");
    EXPECT_EQ(row_label(db, kPersons, a, ctx), "Adam Racz de Galgo, M (p. 1609)");
    EXPECT_EQ(row_label(db, kPersons, i, ctx), "Ilona Zrinyi, F");
    EXPECT_EQ(row_label(db, kPersons, e, ctx), "Elizabeth II, F (b. 1926, p. 2022)");
    EXPECT_EQ(row_label(db, kPersons, 99, ctx), "#99");
}

TEST(Labels, KeyedAndLinkTables) {
    const Royals r = royals();
    const auto ctx = at_year();
    const auto& s = *corpus();
    EXPECT_EQ(row_label(r.db, s.table_index("COUNTRIES"), r.england, ctx), "England");
    EXPECT_EQ(row_label(r.db, s.table_index("TITLES"), r.queen, ctx), "Queen");
    EXPECT_EQ(row_label(r.db, s.table_index("MARRIAGES"), r.m_charles_diana, ctx),
              "Charles III, King of UK, M (b. 1948) / Diana, F (b. 1961, p. 1997) (1981-1996)");
    EXPECT_EQ(row_label(r.db, s.table_index("MARRIAGES"), r.m_harry_meghan, ctx),
              "Harry, M (b. 1984) / Meghan, F (b. 1981) (2018-)");
    EXPECT_EQ(row_label(r.db, s.table_index("REIGNS"), r.r_charles_iii, ctx),
              "Charles III, King of UK, M (b. 1948) / United Kingdom / King (2022-)");
}

TEST(Listing, FilterIsCaseInsensitiveAndSortedByNameThenBirth) {
    Database db(corpus());
    const auto ctx = at_year();
    must_insert(db, person("Adelaide", "F", {}, {}, 1792, 1849), ctx);
    must_insert(db, person("Bob", "M"), ctx);
    must_insert(db, person("adela", "F"), ctx);
    must_insert(db, person("Adela", "F", {}, {}, 1062, 1137), ctx);
    must_insert(db, person("Kadel", "M", {}, {}, 1900, 1950), ctx);
    const Listing l = list_filtered(db, "PERSONS", {"ADEL"}, ctx);
    EXPECT_EQ(l.total, 4u);
    EXPECT_EQ(labels(l), (std::vector<std::string>{"Adela, F (b. 1062, p. 1137)", "adela, F",
                                                   "Adelaide, F (b. 1792, p. 1849)", "Kadel, M (b. 1900, p. 1950)"}));
}

TEST(Listing, Paging) {
    const Royals r = royals();
    ListOptions o;
    o.offset = 2;
    o.limit = 3;
    const Listing l = list_filtered(r.db, "PERSONS", o, at_year());
    EXPECT_EQ(l.total, 18u);
    ASSERT_EQ(l.rows.size(), 3u);
    o.offset = 100;
    EXPECT_TRUE(list_filtered(r.db, "PERSONS", o, at_year()).rows.empty());
    EXPECT_THROW(list_filtered(r.db, "NOPE", {}, at_year()), UnknownTable);
}

TEST(Listing, ReignsByCountryThenStartDate) {
    Database db(corpus());
    const auto ctx = at_year();
    const auto aq = must_insert(db, country("Aquitaine"), ctx);
    const auto charles = must_insert(db, person("Charles II", "M"), ctx);
    const auto caribert = must_insert(db, person("Caribert", "M"), ctx);
    const auto louis = must_insert(db, person("Louis Ier", "M"), ctx);
    must_insert(db, reign({charles, aq, {}, 839, 855}), ctx);
    must_insert(db, reign({louis, aq, {}, 781, 817, 4, {}, 15, {}}), ctx);
    must_insert(db, reign({caribert, aq, {}, 629, 632}), ctx);
    const Listing l = list_filtered(db, "REIGNS", {}, ctx);
    ASSERT_EQ(l.rows.size(), 3u);
    EXPECT_EQ(l.rows[0].label, "Caribert, M / Aquitaine (629-632)");
    EXPECT_EQ(l.rows[1].label, "Louis Ier, M / Aquitaine (781-817)");
    EXPECT_EQ(l.rows[2].label, "Charles II, M / Aquitaine (839-855)");
}

TEST(Listing, MarriagesByHusbandThenYear) {
    const Royals r = royals();
    const Listing l = list_filtered(r.db, "MARRIAGES", {"Charles"}, at_year());
    ASSERT_EQ(l.rows.size(), 2u);
    EXPECT_EQ(l.rows[0].x, r.m_charles_diana);
    EXPECT_EQ(l.rows[1].x, r.m_charles_camilla);
}

TEST(StoreClass, AppliesAndPersists) {
    const auto dir = temp_dir();
    const auto path = dir / "store.json";
    Store store(Database(corpus()), at_year(), path);
    EXPECT_TRUE(store.apply(person("Eve", "F")).accepted());
    EXPECT_FALSE(store.apply(person("Cain", "M", 99)).accepted());
    EXPECT_EQ(store.snapshot().total_rows(), 1u);
    EXPECT_TRUE(load_snapshot(path, corpus()) == store.snapshot());
    ImportResult r = store.import("PERSONS", "x,Name,Sex,Mother\n2,Cain,M,1\n", ImportMode::Strict);
    EXPECT_EQ(r.accepted, 1u);
    EXPECT_EQ(load_snapshot(path, corpus()).total_rows(), 2u);
    std::filesystem::remove_all(dir);
}

TEST(StoreClass, FailedPersistLeavesStateUnchanged) {
    const auto dir = temp_dir();
    Store store(Database(corpus()), at_year(), dir / "missing_dir" / "store.json");
    EXPECT_THROW(store.apply(person("Eve", "F")), IoError);
    EXPECT_EQ(store.snapshot().total_rows(), 0u);
    std::filesystem::remove_all(dir);
}

TEST(StoreClass, SnapshotsAreIndependentCopies) {
    Store store(Database(corpus()), at_year());
    const Database before = store.snapshot();
    store.apply(person("Eve", "F"));
    EXPECT_EQ(before.total_rows(), 0u);
    EXPECT_EQ(store.snapshot().total_rows(), 1u);
}
