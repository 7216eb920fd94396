#include "emdm/store.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "emdm/collate.hpp"
#include "emdm/errors.hpp"

namespace emdm {

using nlohmann::json;

namespace {

int require_table(const CompiledSchema& schema, std::string_view name) {
    const int t = schema.table_index(name);
    if (t < 0) throw UnknownTable("unknown set " + std::string(name));
    return t;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
    std::int64_t v = 0;
    const char* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || p != end || s.empty()) return std::nullopt;
    return v;
}

bool is_int_column(const ColumnDef& c) {
    return c.is_ref() || std::holds_alternative<NaturalBits>(*c.value) || std::holds_alternative<IntRange>(*c.value);
}

std::string violation_key(const Violation& v) {
    std::string k = v.constraint_id;
    for (const auto& w : v.witnesses) k += "|" + w.table + "#" + std::to_string(w.x);
    return k;
}

// Loading must not depend on the clock, so CurrentYear bounds are opened up;
// `validate` is where clock-dependent problems get reported.
EvalContext load_context() { return EvalContext::fixed_year(std::numeric_limits<std::int32_t>::max()); }

}  // namespace

ApplyResult apply(const Database& db, const WriteOp& w, const EvalContext& ctx) {
    Database after;
    CheckReport report = check_write(db, w, ctx, &after);
    if (!report.accepted()) return {db, std::move(report)};
    return {std::move(after), std::move(report)};
}

// ---------------------------------------------------------------------------
// CSV

std::vector<CsvRecord> parse_csv(std::string_view text) {
    if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
    std::vector<CsvRecord> out;
    std::size_t i = 0, line = 1;
    while (i < text.size()) {
        CsvRecord rec;
        rec.line = line;
        for (;;) {
            CsvField f;
            if (i < text.size() && text[i] == '"') {
                f.quoted = true;
                const std::size_t open_line = line;
                ++i;
                for (;;) {
                    if (i >= text.size())
                        throw FormatError("line " + std::to_string(open_line) + ": unterminated quoted field");
                    if (text[i] == '"') {
                        if (i + 1 < text.size() && text[i + 1] == '"') {
                            f.text.push_back('"');
                            i += 2;
                            continue;
                        }
                        ++i;
                        break;
                    }
                    if (text[i] == '\n') ++line;
                    f.text.push_back(text[i++]);
                }
                if (i < text.size() && text[i] != ',' && text[i] != '\n' && text[i] != '\r')
                    throw FormatError("line " + std::to_string(line) + ": text after closing quote");
            } else {
                while (i < text.size() && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
                    if (text[i] == '"')
                        throw FormatError("line " + std::to_string(line) + ": quote inside an unquoted field");
                    f.text.push_back(text[i++]);
                }
            }
            rec.fields.push_back(std::move(f));
            if (i < text.size() && text[i] == ',') {
                ++i;
                continue;
            }
            break;
        }
        if (i < text.size() && text[i] == '\r') ++i;
        if (i < text.size() && text[i] == '\n') ++i, ++line;
        const bool blank = rec.fields.size() == 1 && !rec.fields[0].quoted && rec.fields[0].text.empty();
        if (!blank) out.push_back(std::move(rec));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bulk import

ImportResult bulk_import(const Database& db, std::string_view table, std::string_view csv, const EvalContext& ctx,
                         ImportMode mode) {
    const CompiledSchema& schema = db.schema();
    const int t = require_table(schema, table);
    const TableDef& def = schema.tables[static_cast<std::size_t>(t)];
    const std::vector<CsvRecord> records = parse_csv(csv);
    if (records.empty()) throw FormatError("missing header row");

    std::vector<int> columns;
    int x_field = -1;
    std::set<std::string> seen;
    for (const auto& f : records[0].fields) {
        if (!seen.insert(f.text).second) throw FormatError("duplicate column '" + f.text + "' in header");
        if (f.text == "x") {
            x_field = static_cast<int>(columns.size());
            columns.push_back(0);
            continue;
        }
        const int c = def.column_index(f.text);
        if (c < 0) {
            if (def.derived_index(f.text) >= 0) throw FormatError("column '" + f.text + "' is derived");
            throw FormatError(def.name + " has no column '" + f.text + "'");
        }
        columns.push_back(c);
    }
    if (x_field < 0) throw FormatError("header must include x");
    for (std::size_t r = 1; r < records.size(); ++r)
        if (records[r].fields.size() != columns.size())
            throw FormatError("line " + std::to_string(records[r].line) + ": expected " +
                              std::to_string(columns.size()) + " fields, found " +
                              std::to_string(records[r].fields.size()));

    const std::int64_t year = ctx.year();
    const EvalContext fixed = [&] {
        EvalContext c = EvalContext::fixed_year(year);
        c.recursion_limit = ctx.recursion_limit;
        return c;
    }();

    ImportResult result;
    result.db = db;
    Database& working = result.db;
    std::map<std::int64_t, std::size_t> staged;  // x -> index into result.rows
    std::vector<std::map<std::string, Value>> values(records.size() - 1);

    for (std::size_t r = 1; r < records.size(); ++r) {
        RowReport report;
        report.line = records[r].line;
        auto& row_values = values[r - 1];
        try {
            for (std::size_t f = 0; f < columns.size(); ++f) {
                const CsvField& field = records[r].fields[f];
                const ColumnDef& col = def.columns[static_cast<std::size_t>(columns[f])];
                if (static_cast<int>(f) == x_field) {
                    auto x = parse_int(field.text);
                    if (!x) throw DomainError("x = \"" + field.text + "\" is not an integer");
                    report.x = *x;
                    continue;
                }
                if (field.text.empty() && !field.quoted) {
                    row_values[col.name] = Value{};
                } else if (is_int_column(col)) {
                    auto v = parse_int(field.text);
                    if (!v) throw DomainError(def.name + "." + col.name + " = \"" + field.text + "\" is not an integer");
                    row_values[col.name] = col.is_ref() ? Value{Ref{*v}} : Value{*v};
                } else {
                    row_values[col.name] = field.text;
                }
            }
            Row row = make_row(working, t, row_values, *report.x, fixed);
            working.mutable_rows(t).emplace(*report.x, std::move(row));
            working.set_next_id(t, std::max(working.next_id(t), *report.x + 1));
            report.accepted = true;
            staged.emplace(*report.x, result.rows.size());
        } catch (const Error& e) {
            report.error = e.what();
        }
        result.rows.push_back(std::move(report));
    }

    auto finish = [&] {
        result.accepted = result.rejected = 0;
        for (const auto& r : result.rows) (r.accepted ? result.accepted : result.rejected)++;
        return result;
    };
    auto abort = [&] {
        result.aborted = true;
        result.db = db;
        for (auto& r : result.rows) r.accepted = false;
        return finish();
    };

    if (mode == ImportMode::Strict && staged.size() + 1 != records.size()) return abort();

    std::set<std::string> baseline;
    if (db.total_rows() > 0)
        for (const auto& v : check_all(db, fixed).violations) baseline.insert(violation_key(v));

    for (;;) {
        CheckAllOptions opts;
        opts.prior = &db;
        std::vector<Violation> fresh;
        for (auto& v : check_all(working, fixed, opts).violations)
            if (!baseline.count(violation_key(v))) fresh.push_back(std::move(v));
        if (fresh.empty()) break;

        // Blame each violation on its latest staged witness, as a row-by-row
        // load would have.
        std::map<std::size_t, std::vector<Violation>> blamed;
        bool unattributed = false;
        for (auto& v : fresh) {
            std::optional<std::size_t> culprit;
            for (const auto& w : v.witnesses) {
                if (w.table != def.name) continue;
                auto it = staged.find(w.x);
                if (it != staged.end() && (!culprit || it->second > *culprit)) culprit = it->second;
            }
            if (culprit)
                blamed[*culprit].push_back(std::move(v));
            else
                unattributed = true;
        }

        if (mode == ImportMode::Strict) {
            for (auto& [idx, vs] : blamed) result.rows[idx].violations = std::move(vs);
            return abort();
        }

        if (unattributed) {
            // A violation no staged row witnesses: fall back to applying the
            // surviving rows one at a time, which pins each rejection down.
            working = db;
            for (auto& r : result.rows) {
                if (!r.accepted) continue;
                const std::size_t idx = static_cast<std::size_t>(&r - result.rows.data());
                Insert ins{def.name, values[idx], r.x};
                ApplyResult a = apply(working, ins, fixed);
                if (!a.report.accepted()) {
                    r.accepted = false;
                    r.violations = std::move(a.report.violations);
                }
                working = std::move(a.db);
            }
            break;
        }

        auto& [idx, vs] = *blamed.begin();
        RowReport& rejected = result.rows[idx];
        rejected.accepted = false;
        rejected.violations = std::move(vs);
        working.mutable_rows(t).erase(*rejected.x);
        staged.erase(*rejected.x);
    }
    return finish();
}

// ---------------------------------------------------------------------------
// Snapshots

std::string snapshot_json(const Database& db) {
    const CompiledSchema& schema = db.schema();
    json doc;
    doc["schemaDigest"] = schema.digest;
    json next = json::object();
    json tables = json::object();
    for (std::size_t t = 0; t < schema.tables.size(); ++t) {
        const TableDef& def = schema.tables[t];
        next[def.name] = db.next_id(static_cast<int>(t));
        json rows = json::array();
        for (const auto& [x, row] : db.rows(static_cast<int>(t))) {
            json r = json::object();
            for (std::size_t c = 0; c < def.columns.size(); ++c) {
                const Value& v = row.values[c];
                if (is_null(v))
                    r[def.columns[c].name] = nullptr;
                else if (auto* i = std::get_if<std::int64_t>(&v))
                    r[def.columns[c].name] = *i;
                else if (auto* s = std::get_if<std::string>(&v))
                    r[def.columns[c].name] = *s;
                else
                    r[def.columns[c].name] = std::get<Ref>(v).x;
            }
            rows.push_back(std::move(r));
        }
        tables[def.name] = std::move(rows);
    }
    doc["nextIds"] = std::move(next);
    doc["tables"] = std::move(tables);
    return doc.dump(1) + "\n";
}

Database parse_snapshot(std::string_view text, std::shared_ptr<const CompiledSchema> schema) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw CorruptSnapshot(std::string("snapshot is not valid JSON: ") + e.what());
    }
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw CorruptSnapshot("snapshot " + what);
    };
    require(doc.is_object(), "is not a JSON object");
    require(doc.contains("schemaDigest") && doc["schemaDigest"].is_string(), "lacks schemaDigest");
    const std::string digest = doc["schemaDigest"].get<std::string>();
    if (digest != schema->digest)
        throw DigestMismatch("snapshot was written for schema " + digest + ", current schema is " + schema->digest);
    require(doc.contains("nextIds") && doc["nextIds"].is_object(), "lacks nextIds");
    require(doc.contains("tables") && doc["tables"].is_object(), "lacks tables");
    for (const auto& [name, rows] : doc["tables"].items())
        require(schema->table_index(name) >= 0, "has unknown table " + name);

    Database db(schema);
    const EvalContext ctx = load_context();
    for (std::size_t t = 0; t < schema->tables.size(); ++t) {
        const TableDef& def = schema->tables[t];
        const int ti = static_cast<int>(t);
        require(doc["tables"].contains(def.name) && doc["tables"][def.name].is_array(), "lacks rows for " + def.name);
        auto& rows = db.mutable_rows(ti);
        std::int64_t max_x = 0;
        for (const auto& r : doc["tables"][def.name]) {
            require(r.is_object() && r.contains("x") && r["x"].is_number_integer(), "has a " + def.name + " row without x");
            const std::int64_t x = r["x"].get<std::int64_t>();
            std::map<std::string, Value> values;
            for (const auto& [key, v] : r.items()) {
                if (key == "x") continue;
                const int c = def.column_index(key);
                require(c > 0, "has unknown column " + def.name + "." + key);
                const ColumnDef& col = def.columns[static_cast<std::size_t>(c)];
                if (v.is_null())
                    values[key] = Value{};
                else if (v.is_number_integer() && is_int_column(col))
                    values[key] = col.is_ref() ? Value{Ref{v.get<std::int64_t>()}} : Value{v.get<std::int64_t>()};
                else if (v.is_string() && !is_int_column(col))
                    values[key] = v.get<std::string>();
                else
                    throw CorruptSnapshot("snapshot has a mistyped value for " + def.name + "." + key);
            }
            try {
                rows.emplace(x, make_row(db, ti, values, x, ctx));
            } catch (const Error& e) {
                throw CorruptSnapshot(std::string("snapshot row rejected: ") + e.what());
            }
            max_x = std::max(max_x, x);
        }
        const json& next = doc["nextIds"];
        require(next.contains(def.name) && next[def.name].is_number_integer(), "lacks nextIds for " + def.name);
        db.set_next_id(ti, std::max(next[def.name].get<std::int64_t>(), max_x + 1));
    }
    return db;
}

void save_snapshot(const Database& db, const std::filesystem::path& path) {
    const std::string text = snapshot_json(db);
    // Write beside the target and rename, so a crash never leaves half a file.
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << text;
        out.flush();
        if (!out) throw IoError("cannot write " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot replace " + path.string() + ": " + ec.message());
}

Database load_snapshot(const std::filesystem::path& path, std::shared_ptr<const CompiledSchema> schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_snapshot(ss.str(), std::move(schema));
}

// ---------------------------------------------------------------------------
// Labels and listings

namespace {

const std::int64_t* int_at(const Row& row, int col) {
    return col < 0 ? nullptr : std::get_if<std::int64_t>(&row.values[static_cast<std::size_t>(col)]);
}

std::string label_at(const Database& db, int table, std::int64_t x, int depth) {
    const TableDef& def = db.schema().tables[static_cast<std::size_t>(table)];
    const Row* row = db.find(table, x);
    if (!row) return "#" + std::to_string(x);

    if (const int name = def.column_index("Name"); name > 0) {
        std::string out = value_to_string(row->values[static_cast<std::size_t>(name)]);
        if (const int sex = def.column_index("Sex"); sex > 0 && !is_null(row->values[static_cast<std::size_t>(sex)]))
            out += ", " + value_to_string(row->values[static_cast<std::size_t>(sex)]);
        const std::int64_t* b = int_at(*row, def.column_index("BirthYear"));
        const std::int64_t* p = int_at(*row, def.column_index("PassedAwayYear"));
        if (b && p)
            out += " (b. " + std::to_string(*b) + ", p. " + std::to_string(*p) + ")";
        else if (b)
            out += " (b. " + std::to_string(*b) + ")";
        else if (p)
            out += " (p. " + std::to_string(*p) + ")";
        return out;
    }
    for (std::size_t c = 1; c < def.columns.size(); ++c)
        if (def.columns[c].is_key && !def.columns[c].is_ref()) return value_to_string(row->values[c]);

    // Link rows: the referenced labels, then the first two ranged columns
    // (start and end years) as "(from-to)", an unknown end left blank.
    std::vector<std::string> parts;
    std::vector<const Value*> span;
    for (std::size_t c = 1; c < def.columns.size(); ++c) {
        const Value& v = row->values[c];
        if (auto* r = std::get_if<Ref>(&v)) {
            parts.push_back(depth < 3 ? label_at(db, def.columns[c].ref_table, r->x, depth + 1)
                                      : "#" + std::to_string(r->x));
        } else if (def.columns[c].value && std::holds_alternative<IntRange>(*def.columns[c].value) && span.size() < 2) {
            span.push_back(&v);
        }
    }
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? " / " : "") + parts[i];
    if (out.empty()) out = "#" + std::to_string(x);
    auto year = [](const Value* v) { return v && !is_null(*v) ? value_to_string(*v) : std::string(); };
    const std::string from = span.empty() ? "" : year(span[0]);
    const std::string to = span.size() < 2 ? "" : year(span[1]);
    if (!from.empty() || !to.empty()) out += " (" + from + (span.size() > 1 ? "-" + to : "") + ")";
    return out;
}

// One component of a listing's sort key.
struct SortPart {
    enum Kind { Text, Int, DateK } kind = Text;
    std::u32string folded;
    std::string raw;
    std::optional<std::int64_t> number;
    std::optional<Date> date;
};

int compare_part(const SortPart& a, const SortPart& b) {
    switch (a.kind) {
        case SortPart::Text:
            if (int c = a.folded.compare(b.folded); c != 0) return c < 0 ? -1 : 1;
            if (int c = a.raw.compare(b.raw); c != 0) return c < 0 ? -1 : 1;
            return 0;
        case SortPart::Int:
            if (a.number && b.number) return *a.number < *b.number ? -1 : *a.number > *b.number ? 1 : 0;
            return a.number ? -1 : b.number ? 1 : 0;
        case SortPart::DateK:
            if (a.date && b.date) {
                const auto c = compare_dates(*a.date, *b.date);
                return c < 0 ? -1 : c > 0 ? 1 : 0;
            }
            return a.date ? -1 : b.date ? 1 : 0;
    }
    return 0;
}

SortPart text_part(std::string s) {
    SortPart k;
    k.folded = fold_case(s);
    k.raw = std::move(s);
    return k;
}

SortPart int_part(const Row& row, int col) {
    SortPart k;
    k.kind = SortPart::Int;
    if (const std::int64_t* v = int_at(row, col)) k.number = *v;
    return k;
}

SortPart ref_part(const Database& db, const TableDef& def, const Row& row, int col) {
    const auto* r = std::get_if<Ref>(&row.values[static_cast<std::size_t>(col)]);
    return text_part(r ? label_at(db, def.columns[static_cast<std::size_t>(col)].ref_table, r->x, 0) : std::string());
}

std::vector<SortPart> sort_key(const Database& db, int table, std::int64_t x, const EvalContext& ctx) {
    const TableDef& def = db.schema().tables[static_cast<std::size_t>(table)];
    const Row& row = *db.find(table, x);
    std::vector<SortPart> key;
    const int name = def.column_index("Name");
    const int husband = def.column_index("Husband");
    const int wife = def.column_index("Wife");
    const int country = def.column_index("Country");
    if (name > 0) {
        key.push_back(text_part(value_to_string(row.values[static_cast<std::size_t>(name)])));
        key.push_back(int_part(row, def.column_index("BirthYear")));
    } else if (husband > 0 && wife > 0) {
        key.push_back(ref_part(db, def, row, husband));
        key.push_back(int_part(row, def.column_index("MarriageYear")));
        key.push_back(ref_part(db, def, row, wife));
    } else if (country > 0 && def.columns[static_cast<std::size_t>(country)].is_ref() &&
               def.derived_index("FromDate") >= 0) {
        key.push_back(ref_part(db, def, row, country));
        SortPart d;
        d.kind = SortPart::DateK;
        const auto derived = compute_derived(db, table, x, ctx);
        if (auto it = derived.find("FromDate"); it != derived.end())
            if (auto* date = std::get_if<Date>(&it->second)) d.date = *date;
        key.push_back(d);
    } else {
        key.push_back(text_part(label_at(db, table, x, 0)));
    }
    return key;
}

}  // namespace

std::string row_label(const Database& db, int table, std::int64_t x, const EvalContext&) {
    return label_at(db, table, x, 0);
}

void sort_rows(const Database& db, int table, std::vector<std::int64_t>& xs, const EvalContext& ctx) {
    std::unordered_map<std::int64_t, std::vector<SortPart>> keys;
    for (std::int64_t x : xs) keys.emplace(x, sort_key(db, table, x, ctx));
    std::sort(xs.begin(), xs.end(), [&](std::int64_t a, std::int64_t b) {
        const auto& ka = keys.at(a);
        const auto& kb = keys.at(b);
        for (std::size_t i = 0; i < ka.size(); ++i)
            if (int c = compare_part(ka[i], kb[i]); c != 0) return c < 0;
        return a < b;
    });
}

Listing list_filtered(const Database& db, std::string_view table, const ListOptions& options, const EvalContext& ctx) {
    const int t = require_table(db.schema(), table);
    const std::u32string needle = fold_case(options.filter);
    std::unordered_map<std::int64_t, std::string> labels;
    std::vector<std::int64_t> xs;
    for (const auto& [x, row] : db.rows(t)) {
        std::string label = label_at(db, t, x, 0);
        if (!needle.empty()) {
            const std::u32string hay = fold_case(label);
            if (std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) == hay.end()) continue;
        }
        labels.emplace(x, std::move(label));
        xs.push_back(x);
    }
    sort_rows(db, t, xs, ctx);
    Listing out;
    out.total = xs.size();
    const std::size_t begin = std::min(options.offset, xs.size());
    const std::size_t end = options.limit ? std::min(xs.size(), begin + *options.limit) : xs.size();
    for (std::size_t i = begin; i < end; ++i) out.rows.push_back({xs[i], labels.at(xs[i])});
    return out;
}

// ---------------------------------------------------------------------------
// Store

Store::Store(Database db, EvalContext ctx, std::optional<std::filesystem::path> snapshot)
    : db_(std::move(db)), ctx_(std::move(ctx)), path_(std::move(snapshot)) {}

Database Store::snapshot() const {
    std::lock_guard lock(mutex_);
    return db_;
}

CheckReport Store::apply(const WriteOp& w) {
    std::lock_guard lock(mutex_);
    ApplyResult r = emdm::apply(db_, w, ctx_);
    if (r.report.accepted()) {
        Database previous = std::move(db_);
        db_ = std::move(r.db);
        try {
            persist_locked();
        } catch (...) {
            db_ = std::move(previous);
            throw;
        }
    }
    return std::move(r.report);
}

ImportResult Store::import(std::string_view table, std::string_view csv, ImportMode mode) {
    std::lock_guard lock(mutex_);
    ImportResult r = bulk_import(db_, table, csv, ctx_, mode);
    if (!r.aborted && r.accepted > 0) {
        Database previous = std::move(db_);
        db_ = r.db;
        try {
            persist_locked();
        } catch (...) {
            db_ = std::move(previous);
            throw;
        }
    }
    return r;
}

void Store::persist_locked() {
    if (path_) save_snapshot(db_, *path_);
}

}  // namespace emdm
