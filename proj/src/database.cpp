#include "emdm/database.hpp"

namespace emdm {

std::string value_to_string(const Value& v) {
    if (is_null(v)) return "NULL";
    if (auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
    if (auto* s = std::get_if<std::string>(&v)) return *s;
    return "#" + std::to_string(std::get<Ref>(v).x);
}

Database::Database(std::shared_ptr<const CompiledSchema> schema) : schema_(std::move(schema)) {
    for (std::size_t i = 0; i < schema_->tables.size(); ++i) {
        tables_.push_back(std::make_shared<TableData>());
        next_ids_.push_back(1);
    }
}

const Row* Database::find(int table, std::int64_t x) const {
    const auto& rows = tables_[static_cast<std::size_t>(table)]->rows;
    auto it = rows.find(x);
    return it == rows.end() ? nullptr : &it->second;
}

std::size_t Database::total_rows() const {
    std::size_t n = 0;
    for (const auto& t : tables_) n += t->rows.size();
    return n;
}

std::map<std::int64_t, Row>& Database::mutable_rows(int table) {
    auto& slot = tables_[static_cast<std::size_t>(table)];
    if (slot.use_count() > 1) slot = std::make_shared<TableData>(*slot);
    return slot->rows;
}

bool Database::operator==(const Database& other) const {
    if (schema_ != other.schema_ && (!schema_ || !other.schema_ || schema_->digest != other.schema_->digest))
        return false;
    if (next_ids_ != other.next_ids_ || tables_.size() != other.tables_.size()) return false;
    for (std::size_t i = 0; i < tables_.size(); ++i)
        if (tables_[i] != other.tables_[i] && tables_[i]->rows != other.tables_[i]->rows) return false;
    return true;
}

}  // namespace emdm
