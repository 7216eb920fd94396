#include "emdm/service.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <mutex>

#include <httplib.h>
#include <json.hpp>

#include "emdm/datalog.hpp"
#include "emdm/errors.hpp"
#include "emdm/parser.hpp"

namespace emdm {

using nlohmann::json;

namespace {

struct HttpError {
    int status;
    std::string code;
    std::string message;
    std::vector<Violation> violations;
};

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < path.size()) {
        std::size_t j = path.find('/', i);
        if (j == std::string::npos) j = path.size();
        if (j > i) out.push_back(path.substr(i, j - i));
        i = j + 1;
    }
    return out;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::optional<std::int64_t> to_int(const std::string& s) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

json value_json(const Value& v) {
    if (is_null(v)) return nullptr;
    if (auto* i = std::get_if<std::int64_t>(&v)) return *i;
    if (auto* s = std::get_if<std::string>(&v)) return *s;
    return std::get<Ref>(v).x;
}

json derived_json(const DerivedValue& v) {
    if (auto* i = std::get_if<std::int64_t>(&v)) return *i;
    if (auto* s = std::get_if<std::string>(&v)) return *s;
    if (auto* d = std::get_if<Date>(&v)) return json{{"year", d->year}, {"month", d->month}, {"day", d->day}};
    return nullptr;
}

json violation_json(const Violation& v) {
    json ws = json::array();
    for (const auto& w : v.witnesses) ws.push_back({{"table", w.table}, {"x", w.x}});
    return {{"constraint", v.constraint_id}, {"kind", v.kind}, {"message", v.message}, {"witnesses", ws}};
}

json error_json(const HttpError& e) {
    json vs = json::array();
    for (const auto& v : e.violations) vs.push_back(violation_json(v));
    json out = {{"code", e.code}, {"message", e.message}};
    if (!e.violations.empty()) out["violations"] = vs;
    return out;
}

// A rejected request that never reached the constraint checker still
// reports one violation, naming the offending input.
HttpError input_error(const std::string& code, const std::string& message) {
    Violation v;
    v.constraint_id = code;
    v.kind = "Input";
    v.message = message;
    return HttpError{422, code, message, {v}};
}

}  // namespace

struct Service::Impl {
    std::shared_ptr<Store> store;
    std::mutex server_mutex;
    httplib::Server* server = nullptr;
    bool stop_requested = false;

    int table_of(const Database& db, const std::string& segment) const {
        const auto& tables = db.schema().tables;
        for (std::size_t i = 0; i < tables.size(); ++i)
            if (lower(tables[i].name) == lower(segment)) return static_cast<int>(i);
        throw HttpError{404, "UnknownTable", "no set named " + segment, {}};
    }

    std::int64_t id_of(const std::string& segment) const {
        auto x = to_int(segment);
        if (!x) throw HttpError{404, "NotFound", "not a row id: " + segment, {}};
        return *x;
    }

    json row_json(const Database& db, int t, std::int64_t x) const {
        const TableDef& def = db.schema().tables[static_cast<std::size_t>(t)];
        const Row* row = db.find(t, x);
        if (!row) throw HttpError{404, "NotFound", def.name + " has no x = " + std::to_string(x), {}};
        const EvalContext& ctx = store->context();
        json values = json::object();
        json refs = json::object();
        for (std::size_t c = 0; c < def.columns.size(); ++c) {
            values[def.columns[c].name] = value_json(row->values[c]);
            if (auto* r = std::get_if<Ref>(&row->values[c]))
                refs[def.columns[c].name] = row_label(db, def.columns[c].ref_table, r->x, ctx);
        }
        json derived = json::object();
        for (const auto& [name, v] : compute_derived(db, t, x, ctx)) derived[name] = derived_json(v);
        return {{"x", x},
                {"label", row_label(db, t, x, ctx)},
                {"values", values},
                {"refLabels", refs},
                {"derived", derived}};
    }

    std::map<std::string, Value> payload_values(const Database& db, int t, const json& body) const {
        if (!body.is_object()) throw input_error("FormatError", "request body must be a JSON object");
        const TableDef& def = db.schema().tables[static_cast<std::size_t>(t)];
        std::map<std::string, Value> out;
        for (const auto& [key, v] : body.items()) {
            const int c = def.column_index(key);
            const bool ref = c >= 0 && def.columns[static_cast<std::size_t>(c)].is_ref();
            if (v.is_null())
                out[key] = Value{};
            else if (v.is_number_integer())
                out[key] = ref ? Value{Ref{v.get<std::int64_t>()}} : Value{v.get<std::int64_t>()};
            else if (v.is_string())
                out[key] = v.get<std::string>();
            else
                throw input_error("DomainError", def.name + "." + key + " must be a string, an integer or null");
        }
        return out;
    }

    json parse_body(const std::string& text) const {
        try {
            return json::parse(text.empty() ? std::string("{}") : text);
        } catch (const json::exception&) {
            throw input_error("FormatError", "request body is not valid JSON");
        }
    }

    HttpResponse respond(int status, const json& body) const { return HttpResponse{status, body.dump()}; }

    HttpResponse write(const WriteOp& w, int success_status) {
        CheckReport report;
        try {
            report = store->apply(w);
        } catch (const NotFound& e) {
            throw HttpError{404, e.code(), e.what(), {}};
        } catch (const DomainError& e) {
            throw input_error(e.code(), e.what());
        } catch (const UnknownField& e) {
            throw input_error(e.code(), e.what());
        }
        if (!report.accepted()) {
            const bool referenced = std::all_of(report.violations.begin(), report.violations.end(),
                                                [](const Violation& v) { return v.kind == "Referenced"; });
            if (std::holds_alternative<Delete>(w) && referenced)
                throw HttpError{409, "Referenced", "the row is still referenced", report.violations};
            throw HttpError{422, "ConstraintViolation", report.violations.front().message, report.violations};
        }
        const Database db = store->snapshot();
        return std::visit(
            [&](const auto& op) -> HttpResponse {
                using T = std::decay_t<decltype(op)>;
                const int t = db.schema().table_index(op.table);
                if constexpr (std::is_same_v<T, Insert>) {
                    return respond(success_status, row_json(db, t, *report.assigned_x));
                } else if constexpr (std::is_same_v<T, Update>) {
                    return respond(success_status, row_json(db, t, op.x));
                } else {
                    return respond(success_status, json{{"deleted", op.x}, {"table", op.table}});
                }
            },
            w);
    }

    HttpResponse schema_info() const {
        const Database db = store->snapshot();
        const CompiledSchema& s = db.schema();
        json sets = json::array();
        for (const auto& t : s.tables) {
            json fields = json::array();
            for (const auto& c : t.columns) {
                json f = {{"name", c.name}, {"nullable", c.nullable}, {"key", c.is_key}};
                if (c.is_ref()) {
                    f["kind"] = "ref";
                    f["ref"] = s.tables[static_cast<std::size_t>(c.ref_table)].name;
                } else {
                    f["kind"] = "value";
                    f["domain"] = render_domain(*c.value);
                }
                fields.push_back(f);
            }
            json derived = json::array();
            for (const auto& d : t.derived) derived.push_back(d.name);
            sets.push_back({{"name", t.name}, {"fields", fields}, {"derived", derived}, {"rows", db.rows(s.table_index(t.name)).size()}});
        }
        json constraints = json::array();
        for (const auto& c : s.constraints)
            constraints.push_back({{"id", c.id},
                                   {"kind", kind_name(c.kind)},
                                   {"implicit", c.implicit},
                                   {"text", c.display_text}});
        const ElementCounts counts = count_elements(*s.doc);
        const SchemaStats stats = schema_stats(s);
        return respond(200, json{{"digest", s.digest},
                                 {"sets", sets},
                                 {"constraints", constraints},
                                 {"counts",
                                  {{"functions", counts.functions},
                                   {"constraints", counts.explicit_constraints},
                                   {"rules", counts.rules}}},
                                 {"stats",
                                  {{"tables", stats.tables},
                                   {"foreignKeys", stats.foreign_keys},
                                   {"uniqueKeys", stats.unique_keys},
                                   {"compiledConstraints", stats.compiled_constraints},
                                   {"datalogRules", stats.datalog_rules}}},
                                 {"currentYear", store->context().year()}});
    }

    HttpResponse list(const std::string& set, const HttpRequest& req) const {
        const Database db = store->snapshot();
        const int t = table_of(db, set);
        ListOptions opts;
        if (auto it = req.query.find("filter"); it != req.query.end()) opts.filter = it->second;
        if (auto it = req.query.find("offset"); it != req.query.end()) {
            auto v = to_int(it->second);
            if (!v || *v < 0) throw input_error("FormatError", "offset must be a non-negative integer");
            opts.offset = static_cast<std::size_t>(*v);
        }
        if (auto it = req.query.find("limit"); it != req.query.end()) {
            auto v = to_int(it->second);
            if (!v || *v < 0) throw input_error("FormatError", "limit must be a non-negative integer");
            opts.limit = static_cast<std::size_t>(*v);
        }
        const Listing listing = list_filtered(db, db.schema().tables[static_cast<std::size_t>(t)].name, opts,
                                              store->context());
        json rows = json::array();
        for (const auto& r : listing.rows) rows.push_back(row_json(db, t, r.x));
        return respond(200, json{{"total", listing.total}, {"offset", opts.offset}, {"rows", rows}});
    }

    HttpResponse candidates(const std::string& set, const HttpRequest& req) const {
        const Database db = store->snapshot();
        const int t = table_of(db, set);
        const TableDef& def = db.schema().tables[static_cast<std::size_t>(t)];
        auto f = req.query.find("field");
        if (f == req.query.end()) throw input_error("FormatError", "field is required");
        const int col = def.column_index(f->second);
        if (col <= 0 || !def.columns[static_cast<std::size_t>(col)].is_ref())
            throw input_error("UnknownField", def.name + " has no reference field '" + f->second + "'");
        json draft = json::object();
        if (auto d = req.query.find("draft"); d != req.query.end() && !d->second.empty()) draft = parse_body(d->second);
        if (!draft.is_object()) throw input_error("FormatError", "draft must be a JSON object");
        std::optional<std::int64_t> editing;
        if (draft.contains("x")) {
            if (!draft["x"].is_number_integer()) throw input_error("FormatError", "draft x must be an integer");
            editing = draft["x"].get<std::int64_t>();
            draft.erase("x");
        }
        std::map<std::string, Value> values = payload_values(db, t, draft);

        EvalContext ctx = EvalContext::fixed_year(store->context().year());
        ctx.draft = true;
        const int target = def.columns[static_cast<std::size_t>(col)].ref_table;
        std::vector<std::int64_t> ok;
        for (const auto& [x, row] : db.rows(target)) {
            values[f->second] = Ref{x};
            try {
                WriteOp w = editing ? WriteOp{Update{def.name, *editing, values}} : WriteOp{Insert{def.name, values, {}}};
                if (check_write(db, w, ctx).accepted()) ok.push_back(x);
            } catch (const NotFound& e) {
                throw HttpError{404, e.code(), e.what(), {}};
            } catch (const Error& e) {
                throw input_error(e.code(), e.what());
            }
        }
        sort_rows(db, target, ok, ctx);
        json rows = json::array();
        for (std::int64_t x : ok) rows.push_back({{"x", x}, {"label", row_label(db, target, x, ctx)}});
        return respond(200, json{{"field", f->second}, {"total", ok.size()}, {"rows", rows}});
    }

    HttpResponse axioms(const std::string& set) const {
        const Database db = store->snapshot();
        const int t = table_of(db, set);
        json out = json::array();
        for (const auto& c : db.schema().constraints) {
            if (c.table != t && !c.scope_tables.count(t)) continue;
            out.push_back({{"id", c.id}, {"kind", kind_name(c.kind)}, {"implicit", c.implicit}, {"text", c.display_text}});
        }
        return respond(200, json{{"table", db.schema().tables[static_cast<std::size_t>(t)].name}, {"axioms", out}});
    }

    HttpResponse detail(const std::string& set, std::int64_t x) const {
        const Database db = store->snapshot();
        const int t = table_of(db, set);
        json out = {{"person", row_json(db, t, x)}};
        const CompiledSchema& s = db.schema();
        // Every row that points at the person, grouped by table; rows of the
        // person's own table that point at it are its children.
        for (std::size_t other = 0; other < s.tables.size(); ++other) {
            const TableDef& def = s.tables[other];
            std::vector<std::int64_t> xs;
            for (const auto& [rx, row] : db.rows(static_cast<int>(other))) {
                for (std::size_t c = 1; c < def.columns.size(); ++c) {
                    auto* r = std::get_if<Ref>(&row.values[c]);
                    if (def.columns[c].ref_table == t && r && r->x == x) {
                        xs.push_back(rx);
                        break;
                    }
                }
            }
            const bool self = static_cast<int>(other) == t;
            const bool links = std::any_of(def.columns.begin(), def.columns.end(),
                                           [&](const ColumnDef& c) { return c.ref_table == t; });
            if (!links) continue;
            sort_rows(db, static_cast<int>(other), xs, store->context());
            json rows = json::array();
            for (std::int64_t rx : xs) rows.push_back(row_json(db, static_cast<int>(other), rx));
            out[self ? std::string("children") : lower(def.name)] = rows;
        }
        return respond(200, out);
    }

    HttpResponse transitive() const {
        const Database db = store->snapshot();
        const auto start = std::chrono::steady_clock::now();
        const std::vector<ClosurePair> pairs = transitive_closure(db);
        const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        const int t = db.schema().table_index("PERSONS");
        json rows = json::array();
        for (const auto& p : pairs)
            rows.push_back({{"ancestor", p.ancestor},
                            {"ancestorLabel", row_label(db, t, p.ancestor, store->context())},
                            {"descendant", p.descendant},
                            {"descendantLabel", row_label(db, t, p.descendant, store->context())}});
        return respond(200, json{{"count", pairs.size()}, {"elapsedMs", ms}, {"pairs", rows}});
    }

    HttpResponse seeded(std::int64_t seed) const {
        const Database db = store->snapshot();
        const auto start = std::chrono::steady_clock::now();
        std::vector<GenerationEntry> entries;
        try {
            entries = seeded_closure(db, seed);
        } catch (const NotFound& e) {
            throw HttpError{404, e.code(), e.what(), {}};
        }
        const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        const int t = db.schema().table_index("PERSONS");
        json rows = json::array();
        for (const auto& e : entries) {
            std::string shown = (e.generation > 0 ? "+" : "") + std::to_string(e.generation);
            if (!e.label.empty()) shown += " (" + e.label + ")";
            rows.push_back({{"x", e.person},
                            {"label", row_label(db, t, e.person, store->context())},
                            {"generation", e.generation},
                            {"relation", e.label},
                            {"display", shown}});
        }
        return respond(200, json{{"seed", seed},
                                 {"seedLabel", row_label(db, t, seed, store->context())},
                                 {"count", entries.size()},
                                 {"elapsedMs", ms},
                                 {"entries", rows}});
    }

    HttpResponse route(const HttpRequest& req) {
        const std::vector<std::string> seg = split_path(req.path);
        const std::string& m = req.method;
        if (seg.empty() || seg[0] != "api") throw HttpError{404, "NotFound", "no route for " + req.path, {}};
        const std::size_t n = seg.size();
        if (n == 2 && seg[1] == "schema" && m == "GET") return schema_info();
        if (n >= 3 && seg[1] == "queries" && m == "GET") {
            if (n == 3 && seg[2] == "transitive-closure") return transitive();
            if (n == 4 && seg[2] == "closure") return seeded(id_of(seg[3]));
        }
        if (n == 2) {
            if (m == "GET") return list(seg[1], req);
            if (m == "POST") {
                const Database db = store->snapshot();
                const int t = table_of(db, seg[1]);
                auto values = payload_values(db, t, parse_body(req.body));
                return write(Insert{db.schema().tables[static_cast<std::size_t>(t)].name, values, {}}, 201);
            }
        }
        if (n == 3 && m == "GET" && seg[2] == "candidates") return candidates(seg[1], req);
        if (n == 3 && m == "GET" && seg[2] == "axioms") return axioms(seg[1]);
        if (n == 4 && m == "GET" && seg[3] == "detail") return detail(seg[1], id_of(seg[2]));
        if (n == 3) {
            const Database db = store->snapshot();
            const int t = table_of(db, seg[1]);
            const std::string& name = db.schema().tables[static_cast<std::size_t>(t)].name;
            const std::int64_t x = id_of(seg[2]);
            if (m == "GET") return respond(200, row_json(db, t, x));
            if (m == "PUT") {
                json body = parse_body(req.body);
                if (body.is_object() && body.contains("x")) {
                    // x is never bound from a payload; a differing one is an attempt to retarget the edit.
                    if (body["x"] != json(x)) throw input_error("DomainError", name + ".x is read-only");
                    body.erase("x");
                }
                return write(Update{name, x, payload_values(db, t, body)}, 200);
            }
            if (m == "DELETE") return write(Delete{name, x}, 200);
        }
        throw HttpError{404, "NotFound", "no route for " + m + " " + req.path, {}};
    }
};

Service::Service(std::shared_ptr<Store> store) : impl_(std::make_unique<Impl>()) { impl_->store = std::move(store); }

Service::~Service() = default;

HttpResponse Service::handle(const HttpRequest& request) {
    try {
        return impl_->route(request);
    } catch (const HttpError& e) {
        return HttpResponse{e.status, error_json(e).dump()};
    } catch (const UnknownTable& e) {
        return HttpResponse{404, error_json(HttpError{404, e.code(), e.what(), {}}).dump()};
    } catch (const NotFound& e) {
        return HttpResponse{404, error_json(HttpError{404, e.code(), e.what(), {}}).dump()};
    } catch (const Error& e) {
        return HttpResponse{500, error_json(HttpError{500, e.code(), e.what(), {}}).dump()};
    } catch (const std::exception& e) {
        return HttpResponse{500, error_json(HttpError{500, "InternalError", e.what(), {}}).dump()};
    }
}

void Service::serve(const ServeOptions& options) {
    httplib::Server server;
    // The library's default adds SO_REUSEPORT, which would let a second
    // server share a port that is already taken.
    server.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
    });
    auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
        HttpRequest r;
        r.method = req.method;
        r.path = req.path;
        for (const auto& [k, v] : req.params) r.query[k] = v;
        r.body = req.body;
        const HttpResponse out = handle(r);
        res.status = out.status;
        res.set_content(out.body, "application/json");
    };
    server.Get(".*", dispatch);
    server.Post(".*", dispatch);
    server.Put(".*", dispatch);
    server.Delete(".*", dispatch);

    int port = options.port;
    if (port == 0) {
        port = server.bind_to_any_port(options.host);
        if (port < 0) throw BindError("cannot bind " + options.host);
    } else if (!server.bind_to_port(options.host, port)) {
        throw BindError("cannot bind " + options.host + ":" + std::to_string(port));
    }
    {
        std::lock_guard lock(impl_->server_mutex);
        if (impl_->stop_requested) return;
        impl_->server = &server;
    }
    if (options.on_ready) options.on_ready(port);
    server.listen_after_bind();
    std::lock_guard lock(impl_->server_mutex);
    impl_->server = nullptr;
}

void Service::stop() {
    std::lock_guard lock(impl_->server_mutex);
    impl_->stop_requested = true;
    if (impl_->server) {
        // A stop issued between bind and listen would otherwise be lost.
        impl_->server->wait_until_ready();
        impl_->server->stop();
    }
}

}  // namespace emdm
