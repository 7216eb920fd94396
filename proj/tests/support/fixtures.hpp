#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "emdm/store.hpp"

namespace emdm::testing {

std::string corpus_path();
std::string read_text(const std::string& path);

// The bundled genealogy schema, compiled once.
std::shared_ptr<const CompiledSchema> corpus();

// The corpus with the listed constraints dropped; the rest keep their ids.
std::shared_ptr<const CompiledSchema> corpus_without(std::initializer_list<std::string> ids);

EvalContext at_year(std::int64_t year = 2026);

using Opt = std::optional<std::int64_t>;

Insert person(const std::string& name, const std::string& sex, Opt mother = {}, Opt father = {}, Opt birth = {},
              Opt passed = {});
Insert marriage(std::int64_t husband, std::int64_t wife, Opt married = {}, Opt divorced = {});
Insert country(const std::string& name, Opt current = {});
Insert title(const std::string& name);

struct ReignSpec {
    std::int64_t ruler = 0;
    std::int64_t country = 0;
    Opt title;
    std::int64_t from_year = 0;
    Opt to_year;
    Opt from_month, to_month, from_day, to_day;
};
Insert reign(const ReignSpec& r);

// Applies a write that must be accepted; returns the assigned x.
std::int64_t must_insert(Database& db, const Insert& w, const EvalContext& ctx);
void must_apply(Database& db, const WriteOp& w, const EvalContext& ctx);

bool violates(const CheckReport& r, const std::string& id);
std::string describe(const CheckReport& r);

// A small royal family with marriages, countries, titles and reigns; every
// write goes through the checker.
struct Royals {
    Database db;
    std::int64_t george_v, mary, george_vi, elizabeth_ii, philip, charles, diana, william, harry, catherine, george,
        charlotte, louis, meghan, archie, lilibet, camilla, bowes_lyon;
    std::int64_t uk, england, aquitaine, france;
    std::int64_t king, queen;
    std::int64_t m_george_mary, m_elizabeth_philip, m_charles_diana, m_charles_camilla, m_william_catherine,
        m_harry_meghan;
    std::int64_t r_george_v, r_george_vi, r_elizabeth_ii, r_charles_iii;
};
Royals royals(std::shared_ptr<const CompiledSchema> schema = corpus(), const EvalContext& ctx = at_year());

}  // namespace emdm::testing
