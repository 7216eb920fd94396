#include "emdm/cli.hpp"

#include <csignal>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "emdm/collate.hpp"
#include "emdm/datalog.hpp"
#include "emdm/errors.hpp"
#include "emdm/parser.hpp"
#include "emdm/service.hpp"
#include "emdm/store.hpp"

namespace emdm {

using nlohmann::json;

namespace {

// Raised for bad flags, unreadable inputs and other setup problems.
struct UsageError {
    std::string message;
};

struct Options {
    std::string schema;
    std::string store;
    std::optional<std::int64_t> clock_year;
    std::string format = "text";
    int port = 8080;
    std::string mode = "strict";
    std::string table;
    std::string file;
    std::string seed;
    std::optional<std::int64_t> seed_id;
    bool force = false;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError{"cannot read " + path};
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

EvalContext context_of(const Options& o) {
    return o.clock_year ? EvalContext::fixed_year(*o.clock_year) : EvalContext{};
}

json diagnostic_json(const Diagnostic& d) {
    return {{"severity", d.severity == Severity::Error ? "error" : "warning"},
            {"code", d.code},
            {"line", d.span.line},
            {"column", d.span.column},
            {"message", d.message}};
}

json violation_json(const Violation& v) {
    json ws = json::array();
    for (const auto& w : v.witnesses) ws.push_back({{"table", w.table}, {"x", w.x}});
    return {{"constraint", v.constraint_id}, {"kind", v.kind}, {"message", v.message}, {"witnesses", ws}};
}

std::shared_ptr<const CompiledSchema> load_schema(const Options& o, std::ostream& err) {
    if (o.schema.empty()) throw UsageError{"--schema is required"};
    CompileResult r = compile_source(read_file(o.schema));
    for (const auto& d : r.diagnostics)
        if (d.severity == Severity::Error) err << format_diagnostic(d, o.schema) << '\n';
    if (!r.schema) throw UsageError{"schema " + o.schema + " has errors"};
    return r.schema;
}

Database load_store(const Options& o, std::shared_ptr<const CompiledSchema> schema) {
    if (o.store.empty()) throw UsageError{"--store is required"};
    try {
        return load_snapshot(o.store, std::move(schema));
    } catch (const Error& e) {
        throw UsageError{e.code() + ": " + e.what()};
    }
}

int cmd_check(const Options& o, std::ostream& out, std::ostream& err) {
    const std::string path = o.file.empty() ? o.schema : o.file;
    if (path.empty()) throw UsageError{"check needs a schema file"};
    const ParseResult r = parse_schema(read_file(path));
    const bool failed = has_errors(r.diagnostics);
    ElementCounts counts;
    if (r.doc) counts = count_elements(*r.doc);
    if (o.format == "json") {
        json diags = json::array();
        for (const auto& d : r.diagnostics) diags.push_back(diagnostic_json(d));
        json doc = {{"ok", !failed}, {"diagnostics", diags}};
        if (r.doc)
            doc["counts"] = {{"functions", counts.functions},
                             {"constraints", counts.explicit_constraints},
                             {"rules", counts.rules}};
        out << doc.dump(2) << '\n';
    } else {
        for (const auto& d : r.diagnostics) err << format_diagnostic(d, path) << '\n';
        if (r.doc)
            out << counts.functions << " functions, " << counts.explicit_constraints << " constraints, " << counts.rules
                << " rules\n";
    }
    return failed ? 1 : 0;
}

int cmd_compile(const Options& o, std::ostream& out, std::ostream& err) {
    const std::string path = o.file.empty() ? o.schema : o.file;
    if (path.empty()) throw UsageError{"compile needs a schema file"};
    const CompileResult r = compile_source(read_file(path));
    if (o.format == "json") {
        json diags = json::array();
        for (const auto& d : r.diagnostics) diags.push_back(diagnostic_json(d));
        json doc = {{"ok", r.schema != nullptr}, {"diagnostics", diags}};
        if (r.schema) {
            const SchemaStats s = schema_stats(*r.schema);
            doc["stats"] = {{"tables", s.tables},
                            {"foreignKeys", s.foreign_keys},
                            {"uniqueKeys", s.unique_keys},
                            {"compiledConstraints", s.compiled_constraints},
                            {"datalogRules", s.datalog_rules}};
        }
        out << doc.dump(2) << '\n';
    } else {
        for (const auto& d : r.diagnostics) err << format_diagnostic(d, path) << '\n';
        if (r.schema) {
            const SchemaStats s = schema_stats(*r.schema);
            out << s.tables << " tables, " << s.foreign_keys << " foreign keys, " << s.unique_keys << " unique keys, "
                << s.compiled_constraints << " compiled constraints, " << s.datalog_rules << " rules\n";
        }
    }
    return r.schema ? 0 : 1;
}

int cmd_init(const Options& o, std::ostream& out, std::ostream& err) {
    auto schema = load_schema(o, err);
    if (o.store.empty()) throw UsageError{"--store is required"};
    if (std::filesystem::exists(o.store) && !o.force)
        throw UsageError{o.store + " already exists (use --force to overwrite)"};
    save_snapshot(Database(schema), o.store);
    out << "initialised " << o.store << '\n';
    return 0;
}

int cmd_import(const Options& o, std::ostream& out, std::ostream& err) {
    auto schema = load_schema(o, err);
    if (o.table.empty()) throw UsageError{"--table is required"};
    if (o.file.empty()) throw UsageError{"import needs a CSV file"};
    if (schema->table_index(o.table) < 0) throw UsageError{"unknown set " + o.table};
    const std::string csv = read_file(o.file);
    Store store(load_store(o, schema), context_of(o), std::filesystem::path(o.store));
    ImportResult r;
    try {
        r = store.import(o.table, csv, o.mode == "report" ? ImportMode::Report : ImportMode::Strict);
    } catch (const FormatError& e) {
        throw UsageError{o.file + ": " + e.what()};
    }
    if (o.format == "json") {
        json rows = json::array();
        for (const auto& row : r.rows) {
            if (row.accepted) continue;
            json vs = json::array();
            for (const auto& v : row.violations) vs.push_back(violation_json(v));
            rows.push_back({{"line", row.line}, {"x", row.x ? json(*row.x) : json()}, {"error", row.error}, {"violations", vs}});
        }
        out << json{{"accepted", r.accepted}, {"rejected", r.rejected}, {"aborted", r.aborted}, {"rejections", rows}}.dump(2)
            << '\n';
    } else {
        for (const auto& row : r.rows) {
            if (row.accepted) continue;
            if (!row.error.empty()) out << o.file << ":" << row.line << ": " << row.error << '\n';
            for (const auto& v : row.violations) out << o.file << ":" << row.line << ": " << v.message << '\n';
        }
        if (r.aborted)
            out << "import aborted: nothing loaded\n";
        else
            out << r.accepted << " accepted, " << r.rejected << " rejected\n";
    }
    return r.rejected > 0 || r.aborted ? 1 : 0;
}

int cmd_validate(const Options& o, std::ostream& out, std::ostream& err) {
    auto schema = load_schema(o, err);
    const Database db = load_store(o, schema);
    const CheckReport r = check_all(db, context_of(o));
    if (o.format == "json") {
        json vs = json::array();
        for (const auto& v : r.violations) vs.push_back(violation_json(v));
        out << json{{"rows", db.total_rows()}, {"violations", vs}}.dump(2) << '\n';
    } else {
        for (const auto& v : r.violations) out << v.message << '\n';
        out << db.total_rows() << " rows, " << r.violations.size() << " violation"
            << (r.violations.size() == 1 ? "" : "s") << '\n';
    }
    return r.violations.empty() ? 0 : 1;
}

std::int64_t resolve_seed(const Options& o, const Database& db, const EvalContext& ctx) {
    if (o.seed_id) return *o.seed_id;
    const int t = db.schema().table_index("PERSONS");
    if (t < 0) throw UsageError{"the schema has no PERSONS set"};
    const Listing l = list_filtered(db, "PERSONS", ListOptions{o.seed, 0, std::nullopt}, ctx);
    if (l.rows.size() == 1) return l.rows[0].x;
    // Several partial matches: an exact label or name wins.
    const std::u32string want = fold_case(o.seed);
    const int name = db.schema().tables[static_cast<std::size_t>(t)].column_index("Name");
    std::vector<std::int64_t> exact;
    for (const auto& r : l.rows) {
        const Row* row = db.find(t, r.x);
        const auto* n = name > 0 ? std::get_if<std::string>(&row->values[static_cast<std::size_t>(name)]) : nullptr;
        if (fold_case(r.label) == want || (n && fold_case(*n) == want)) exact.push_back(r.x);
    }
    if (exact.size() == 1) return exact[0];
    if (l.rows.empty()) throw UsageError{"no person matches \"" + o.seed + "\""};
    std::string msg = "\"" + o.seed + "\" matches " + std::to_string(l.rows.size()) + " persons:";
    for (const auto& r : l.rows) msg += "\n  " + std::to_string(r.x) + "  " + r.label;
    throw UsageError{msg};
}

int cmd_closure(const Options& o, std::ostream& out, std::ostream& err) {
    auto schema = load_schema(o, err);
    const Database db = load_store(o, schema);
    const EvalContext ctx = context_of(o);
    const int t = schema->table_index("PERSONS");
    if (t < 0) throw UsageError{"the schema has no PERSONS set"};
    if (!o.seed_id && o.seed.empty()) {
        const auto pairs = transitive_closure(db);
        if (o.format == "json") {
            json rows = json::array();
            for (const auto& p : pairs) rows.push_back({{"ancestor", p.ancestor}, {"descendant", p.descendant}});
            out << json{{"count", pairs.size()}, {"pairs", rows}}.dump(2) << '\n';
        } else {
            out << pairs.size() << " pair(s)\n";
            for (const auto& p : pairs)
                out << row_label(db, t, p.ancestor, ctx) << "\t" << row_label(db, t, p.descendant, ctx) << '\n';
        }
        return 0;
    }
    const std::int64_t seed = resolve_seed(o, db, ctx);
    std::vector<GenerationEntry> entries;
    try {
        entries = seeded_closure(db, seed);
    } catch (const NotFound& e) {
        throw UsageError{e.what()};
    }
    if (o.format == "json") {
        json rows = json::array();
        for (const auto& e : entries)
            rows.push_back({{"x", e.person}, {"generation", e.generation}, {"relation", e.label}});
        out << json{{"seed", seed}, {"count", entries.size()}, {"entries", rows}}.dump(2) << '\n';
    } else {
        out << entries.size() << " person(s) in closure\n";
        for (const auto& e : entries) {
            std::string g = (e.generation > 0 ? "+" : "") + std::to_string(e.generation);
            if (!e.label.empty()) g += " (" + e.label + ")";
            out << g << "\t" << row_label(db, t, e.person, ctx) << '\n';
        }
    }
    return 0;
}

Service* g_serving = nullptr;

extern "C" void on_signal(int) {
    if (g_serving) g_serving->stop();
}

int cmd_serve(const Options& o, std::ostream& out, std::ostream& err) {
    auto schema = load_schema(o, err);
    Database db = o.store.empty() || !std::filesystem::exists(o.store) ? Database(schema) : load_store(o, schema);
    std::optional<std::filesystem::path> path;
    if (!o.store.empty()) path = o.store;
    auto store = std::make_shared<Store>(std::move(db), context_of(o), path);
    Service service(store);
    ServeOptions so;
    so.port = o.port;
    so.on_ready = [&](int port) { out << "listening on http://" << so.host << ":" << port << std::endl; };
    g_serving = &service;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    try {
        service.serve(so);
    } catch (const BindError& e) {
        g_serving = nullptr;
        throw UsageError{e.what()};
    }
    g_serving = nullptr;
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"(E)MDM schema compiler and runtime", "emdm"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* c) {
        c->add_option("--clock-year", o.clock_year, "Year used for CurrentYear()");
        c->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"text", "json"}));
    };
    auto with_store = [&](CLI::App* c) {
        c->add_option("--schema", o.schema, "Schema file")->required();
        c->add_option("--store", o.store, "Snapshot file")->required();
        common(c);
    };

    auto* check = app.add_subcommand("check", "Parse a schema and print its element counts");
    check->add_option("file", o.file, "Schema file");
    check->add_option("--schema", o.schema, "Schema file");
    common(check);

    auto* compile = app.add_subcommand("compile", "Compile a schema and print its storage statistics");
    compile->add_option("file", o.file, "Schema file");
    compile->add_option("--schema", o.schema, "Schema file");
    common(compile);

    auto* init = app.add_subcommand("init", "Create an empty snapshot");
    with_store(init);
    init->add_flag("--force", o.force, "Overwrite an existing snapshot");

    auto* import = app.add_subcommand("import", "Bulk-load a CSV file into a set");
    with_store(import);
    import->add_option("--table", o.table, "Target set")->required();
    import->add_option("--mode", o.mode, "strict aborts on the first rejection; report skips rejected rows")
        ->check(CLI::IsMember({"strict", "report"}));
    import->add_option("file", o.file, "CSV file")->required();

    auto* validate = app.add_subcommand("validate", "Re-check every constraint over a snapshot");
    with_store(validate);

    auto* closure = app.add_subcommand("closure", "Ancestor/descendant closure queries");
    with_store(closure);
    auto* seed = closure->add_option("--seed", o.seed, "Seed person, matched against labels");
    closure->add_option("--seed-id", o.seed_id, "Seed person by x")->excludes(seed);

    auto* serve = app.add_subcommand("serve", "Serve the HTTP API on the loopback interface");
    serve->add_option("--schema", o.schema, "Schema file")->required();
    serve->add_option("--store", o.store, "Snapshot file, created on the first write if absent");
    serve->add_option("--port", o.port, "TCP port")->check(CLI::Range(0, 65535));
    common(serve);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        if (auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front())
            err << sub->help();
        else
            err << app.help();
        return 2;
    }

    try {
        if (check->parsed()) return cmd_check(o, out, err);
        if (compile->parsed()) return cmd_compile(o, out, err);
        if (init->parsed()) return cmd_init(o, out, err);
        if (import->parsed()) return cmd_import(o, out, err);
        if (validate->parsed()) return cmd_validate(o, out, err);
        if (closure->parsed()) return cmd_closure(o, out, err);
        if (serve->parsed()) return cmd_serve(o, out, err);
    } catch (const UsageError& e) {
        err << "error: " << e.message << '\n';
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.code() << ": " << e.what() << '\n';
        return 2;
    }
    return 2;
}

}  // namespace emdm
