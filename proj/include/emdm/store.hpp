#pragma once

// Adjudicated writes, CSV bulk import, JSON snapshots, labelled listings and
// the single-writer store that ties them together.

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emdm/engine.hpp"

namespace emdm {

struct ApplyResult {
    Database db;  // the input database when the write is rejected
    CheckReport report;
};

// Accepts or rejects; never partially applies. Domain and lookup errors
// propagate as exceptions with the input untouched.
ApplyResult apply(const Database& db, const WriteOp& w, const EvalContext& ctx);

enum class ImportMode { Strict, Report };

struct RowReport {
    std::size_t line = 0;  // 1-based physical line of the record's start
    std::optional<std::int64_t> x;
    bool accepted = false;
    std::string error;  // domain or parse problem with the record itself
    std::vector<Violation> violations;
};

struct ImportResult {
    Database db;
    std::vector<RowReport> rows;  // one per record, in file order
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    bool aborted = false;  // strict mode hit a rejection; db is the input
};

// Loads comma-separated records into `table`. The header names columns and
// must include x; an unquoted empty field is NULL. All records are staged
// and checked together, so references within the batch may point forward.
// Throws FormatError for a malformed file, UnknownTable for the table.
ImportResult bulk_import(const Database& db, std::string_view table, std::string_view csv, const EvalContext& ctx,
                         ImportMode mode);

// RFC 4180 records. Each field remembers whether it was quoted.
struct CsvField {
    std::string text;
    bool quoted = false;
};
struct CsvRecord {
    std::size_t line = 0;
    std::vector<CsvField> fields;
};
std::vector<CsvRecord> parse_csv(std::string_view text);

// {schemaDigest, nextIds, tables}; keys sorted, so equal databases give
// equal bytes.
std::string snapshot_json(const Database& db);
Database parse_snapshot(std::string_view text, std::shared_ptr<const CompiledSchema> schema);
void save_snapshot(const Database& db, const std::filesystem::path& path);
Database load_snapshot(const std::filesystem::path& path, std::shared_ptr<const CompiledSchema> schema);

// `Name, Sex (b. Y, p. Z)` for persons; the key value for keyed tables;
// referenced labels plus years for link tables.
std::string row_label(const Database& db, int table, std::int64_t x, const EvalContext& ctx);

struct ListOptions {
    std::string filter;  // case-insensitive substring of the label
    std::size_t offset = 0;
    std::optional<std::size_t> limit;
};

struct ListedRow {
    std::int64_t x = 0;
    std::string label;
};

struct Listing {
    std::vector<ListedRow> rows;
    std::size_t total = 0;  // matches before paging
};

// Persons by (Name, BirthYear); marriages by (husband, MarriageYear, wife);
// reigns by (country, FromDate); other tables by label. Unknown values last.
Listing list_filtered(const Database& db, std::string_view table, const ListOptions& options, const EvalContext& ctx);

// Sorts ids of `table` by that table's listing contract.
void sort_rows(const Database& db, int table, std::vector<std::int64_t>& xs, const EvalContext& ctx);

// Owns the current database. Writes are serialised; readers get an
// immutable copy taken between writes. With a snapshot path, every accepted
// write is persisted before the call returns.
class Store {
public:
    Store(Database db, EvalContext ctx, std::optional<std::filesystem::path> snapshot = std::nullopt);

    Database snapshot() const;
    const EvalContext& context() const { return ctx_; }

    CheckReport apply(const WriteOp& w);
    ImportResult import(std::string_view table, std::string_view csv, ImportMode mode);

private:
    void persist_locked();

    mutable std::mutex mutex_;
    Database db_;
    EvalContext ctx_;
    std::optional<std::filesystem::path> path_;
};

}  // namespace emdm
