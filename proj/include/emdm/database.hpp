#pragma once

// In-memory relational state. Tables are shared between database values and
// copied only when a write touches them, so keeping the pre-write state
// around (for rejection or for temporal checks) costs one table copy.

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "emdm/compiler.hpp"

namespace emdm {

struct Ref {
    std::int64_t x = 0;
    auto operator<=>(const Ref&) const = default;
};

// Text covers both UNICODE and single-character enum values.
using Value = std::variant<std::monostate, std::int64_t, std::string, Ref>;

inline bool is_null(const Value& v) { return std::holds_alternative<std::monostate>(v); }

std::string value_to_string(const Value& v);  // "NULL", "42", "Eve", "#3"

struct Row {
    std::vector<Value> values;  // indexed like TableDef::columns; values[0] is x
    bool operator==(const Row&) const = default;
};

struct TableData {
    std::map<std::int64_t, Row> rows;
};

class Database {
public:
    Database() = default;
    explicit Database(std::shared_ptr<const CompiledSchema> schema);

    const CompiledSchema& schema() const { return *schema_; }
    const std::shared_ptr<const CompiledSchema>& schema_ptr() const { return schema_; }

    const std::map<std::int64_t, Row>& rows(int table) const { return tables_[static_cast<std::size_t>(table)]->rows; }
    const Row* find(int table, std::int64_t x) const;
    std::size_t total_rows() const;

    std::int64_t next_id(int table) const { return next_ids_[static_cast<std::size_t>(table)]; }
    void set_next_id(int table, std::int64_t id) { next_ids_[static_cast<std::size_t>(table)] = id; }

    // Copy-on-write access for staging a change.
    std::map<std::int64_t, Row>& mutable_rows(int table);

    bool operator==(const Database& other) const;

private:
    std::shared_ptr<const CompiledSchema> schema_;
    std::vector<std::shared_ptr<TableData>> tables_;
    std::vector<std::int64_t> next_ids_;
};

}  // namespace emdm
