#include "repgen/schema_catalog.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "repgen/errors.hpp"
#include "repgen/util.hpp"

namespace repgen {

namespace fs = std::filesystem;

std::string column_type_name(ColumnType t) {
    switch (t) {
        case ColumnType::Integer: return "integer";
        case ColumnType::Real: return "real";
        case ColumnType::Text: return "text";
        case ColumnType::Date: return "date";
        case ColumnType::Boolean: return "boolean";
        case ColumnType::Other: return "other";
    }
    return "other";
}

ColumnType column_type_from_decl(const std::string& declared_type) {
    std::string d = lowercase(declared_type);
    if (d.find("bool") != std::string::npos) return ColumnType::Boolean;
    if (d.find("int") != std::string::npos) return ColumnType::Integer;
    if (d.find("date") != std::string::npos || d.find("time") != std::string::npos)
        return ColumnType::Date;
    if (d.find("char") != std::string::npos || d.find("text") != std::string::npos ||
        d.find("clob") != std::string::npos)
        return ColumnType::Text;
    if (d.find("real") != std::string::npos || d.find("floa") != std::string::npos ||
        d.find("doub") != std::string::npos || d.find("dec") != std::string::npos ||
        d.find("num") != std::string::npos)
        return ColumnType::Real;
    return ColumnType::Other;
}

const ColumnSchema* TableSchema::find_column(const std::string& name_ci) const {
    std::string want = lowercase(name_ci);
    for (const auto& c : columns) {
        if (lowercase(c.name) == want) return &c;
    }
    return nullptr;
}

const TableSchema* SchemaCatalog::find_table(const std::string& name_ci) const {
    std::string want = lowercase(name_ci);
    for (const auto& t : tables) {
        if (lowercase(t.name) == want) return &t;
    }
    return nullptr;
}

std::string SchemaCatalog::to_text() const {
    std::ostringstream ss;
    ss << "database=" << db_id << "\n";
    for (const auto& t : tables) {
        ss << "table " << t.name << " (";
        for (size_t i = 0; i < t.columns.size(); ++i) {
            if (i) ss << ", ";
            ss << t.columns[i].name << " " << column_type_name(t.columns[i].data_type);
            if (t.columns[i].comment) ss << " /* " << *t.columns[i].comment << " */";
        }
        ss << ")\n";
    }
    return ss.str();
}

std::string SchemaCatalog::digest() const { return digest64_hex(to_text()); }

nlohmann::json SqlOutcome::to_json() const {
    nlohmann::json j;
    j["sql"] = sql;
    j["columns"] = columns;
    j["rows"] = rows;
    j["truncated"] = truncated;
    j["row_count_total"] = row_count_total;
    j["error"] = error ? nlohmann::json(*error) : nlohmann::json(nullptr);
    return j;
}

SqlOutcome SqlOutcome::from_json(const nlohmann::json& j) {
    SqlOutcome o;
    o.sql = j.at("sql").get<std::string>();
    o.columns = j.at("columns").get<std::vector<std::string>>();
    for (const auto& row : j.at("rows")) {
        o.rows.emplace_back(row.begin(), row.end());
    }
    o.truncated = j.at("truncated").get<bool>();
    o.row_count_total = j.at("row_count_total").get<long long>();
    if (!j.at("error").is_null()) o.error = j.at("error").get<std::string>();
    return o;
}

struct Database::Impl {
    sqlite3* db = nullptr;
    ~Impl() {
        if (db) sqlite3_close(db);
    }
};

Database::Database(Database&&) noexcept = default;
Database& Database::operator=(Database&&) noexcept = default;
Database::~Database() = default;

Database Database::open(const std::string& path) {
    if (!fs::exists(path)) throw ConnectionFailed("no such database file: " + path);
    Database d;
    d.path_ = path;
    d.impl_ = std::make_unique<Impl>();
    int rc = sqlite3_open_v2(path.c_str(), &d.impl_->db, SQLITE_OPEN_READONLY, nullptr);
    if (rc != SQLITE_OK) {
        throw ConnectionFailed("cannot open " + path + ": " +
                               (d.impl_->db ? sqlite3_errmsg(d.impl_->db) : "unknown"));
    }
    // sqlite opens lazily; force a read so corrupt files fail here.
    char* err = nullptr;
    rc = sqlite3_exec(d.impl_->db, "SELECT count(*) FROM sqlite_master;", nullptr, nullptr, &err);
    if (rc != SQLITE_OK) {
        std::string msg = err ? err : "unreadable database";
        sqlite3_free(err);
        throw ConnectionFailed(path + ": " + msg);
    }
    return d;
}

Database Database::create(const std::string& path, const std::string& init_script) {
    if (fs::exists(path)) fs::remove(path);
    Database d;
    d.path_ = path;
    d.impl_ = std::make_unique<Impl>();
    int rc = sqlite3_open_v2(path.c_str(), &d.impl_->db,
                             SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE, nullptr);
    if (rc != SQLITE_OK) throw ConnectionFailed("cannot create " + path);
    if (!init_script.empty()) d.exec_script(init_script);
    return d;
}

void Database::exec_script(const std::string& script) {
    char* err = nullptr;
    int rc = sqlite3_exec(impl_->db, script.c_str(), nullptr, nullptr, &err);
    if (rc != SQLITE_OK) {
        std::string msg = err ? err : "script failed";
        sqlite3_free(err);
        throw std::runtime_error("exec_script: " + msg);
    }
}

namespace {

// Stems "path/to/finance.db" to "finance" for use as db_id.
std::string db_id_from_path(const std::string& path) {
    return fs::path(path).stem().string();
}

nlohmann::json column_value(sqlite3_stmt* stmt, int i) {
    switch (sqlite3_column_type(stmt, i)) {
        case SQLITE_INTEGER:
            return nlohmann::json(static_cast<long long>(sqlite3_column_int64(stmt, i)));
        case SQLITE_FLOAT:
            return nlohmann::json(sqlite3_column_double(stmt, i));
        case SQLITE_NULL:
            return nlohmann::json(nullptr);
        default: {
            const unsigned char* txt = sqlite3_column_text(stmt, i);
            return nlohmann::json(txt ? reinterpret_cast<const char*>(txt) : "");
        }
    }
}

}  // namespace

SchemaCatalog Database::introspect() const {
    SchemaCatalog catalog;
    catalog.db_id = db_id_from_path(path_);

    sqlite3_stmt* stmt = nullptr;
    int rc = sqlite3_prepare_v2(
        impl_->db,
        "SELECT name FROM sqlite_master WHERE type='table' AND name NOT LIKE 'sqlite_%' "
        "ORDER BY rowid;",
        -1, &stmt, nullptr);
    if (rc != SQLITE_OK) throw ConnectionFailed(sqlite3_errmsg(impl_->db));
    std::vector<std::string> names;
    while (sqlite3_step(stmt) == SQLITE_ROW) {
        names.emplace_back(reinterpret_cast<const char*>(sqlite3_column_text(stmt, 0)));
    }
    sqlite3_finalize(stmt);
    if (names.empty()) throw EmptyDatabase(path_ + " has no user tables");

    for (const auto& name : names) {
        TableSchema table;
        table.name = name;

        std::string pragma = "PRAGMA table_info(\"" + name + "\");";
        rc = sqlite3_prepare_v2(impl_->db, pragma.c_str(), -1, &stmt, nullptr);
        if (rc != SQLITE_OK) throw ConnectionFailed(sqlite3_errmsg(impl_->db));
        while (sqlite3_step(stmt) == SQLITE_ROW) {
            ColumnSchema col;
            col.name = reinterpret_cast<const char*>(sqlite3_column_text(stmt, 1));
            const unsigned char* decl = sqlite3_column_text(stmt, 2);
            col.data_type =
                column_type_from_decl(decl ? reinterpret_cast<const char*>(decl) : "");
            table.columns.push_back(std::move(col));
        }
        sqlite3_finalize(stmt);

        std::string count_sql = "SELECT count(*) FROM \"" + name + "\";";
        rc = sqlite3_prepare_v2(impl_->db, count_sql.c_str(), -1, &stmt, nullptr);
        if (rc == SQLITE_OK && sqlite3_step(stmt) == SQLITE_ROW) {
            table.row_count = sqlite3_column_int64(stmt, 0);
        }
        sqlite3_finalize(stmt);

        catalog.tables.push_back(std::move(table));
    }
    return catalog;
}

SqlOutcome Database::execute(const std::string& sql, long long row_limit) const {
    SqlOutcome out;
    out.sql = sql;

    sqlite3_stmt* stmt = nullptr;
    int rc = sqlite3_prepare_v2(impl_->db, sql.c_str(), -1, &stmt, nullptr);
    if (rc != SQLITE_OK) {
        out.error = sqlite3_errmsg(impl_->db);
        if (stmt) sqlite3_finalize(stmt);
        return out;
    }

    int ncols = sqlite3_column_count(stmt);
    std::vector<std::string> columns;
    columns.reserve(ncols);
    for (int i = 0; i < ncols; ++i) {
        const char* cn = sqlite3_column_name(stmt, i);
        columns.emplace_back(cn ? cn : "");
    }

    long long total = 0;
    while (true) {
        rc = sqlite3_step(stmt);
        if (rc == SQLITE_ROW) {
            if (total < row_limit) {
                std::vector<nlohmann::json> row;
                row.reserve(ncols);
                for (int i = 0; i < ncols; ++i) row.push_back(column_value(stmt, i));
                out.rows.push_back(std::move(row));
            }
            ++total;
        } else if (rc == SQLITE_DONE) {
            break;
        } else {
            // Runtime failure mid-scan: report the error, drop partial rows.
            out.rows.clear();
            out.error = sqlite3_errmsg(impl_->db);
            sqlite3_finalize(stmt);
            out.truncated = false;
            out.row_count_total = 0;
            return out;
        }
    }
    sqlite3_finalize(stmt);

    out.columns = std::move(columns);
    out.row_count_total = total;
    out.truncated = total > row_limit;
    return out;
}

std::vector<CellRef> Database::sample_cells(const TableSchema& table, long long budget) const {
    std::vector<CellRef> cells;
    if (budget <= 0 || table.columns.empty()) return cells;

    std::string sql = "SELECT * FROM \"" + table.name + "\";";
    sqlite3_stmt* stmt = nullptr;
    if (sqlite3_prepare_v2(impl_->db, sql.c_str(), -1, &stmt, nullptr) != SQLITE_OK) {
        if (stmt) sqlite3_finalize(stmt);
        return cells;
    }
    int ncols = sqlite3_column_count(stmt);

    // (column index, value text) pairs already emitted; distinct values preferred.
    std::vector<std::vector<std::string>> seen(ncols);
    while (static_cast<long long>(cells.size()) < budget && sqlite3_step(stmt) == SQLITE_ROW) {
        for (int i = 0; i < ncols && static_cast<long long>(cells.size()) < budget; ++i) {
            if (sqlite3_column_type(stmt, i) == SQLITE_NULL) continue;
            const unsigned char* txt = sqlite3_column_text(stmt, i);
            std::string value = txt ? reinterpret_cast<const char*>(txt) : "";
            auto& bucket = seen[i];
            if (std::find(bucket.begin(), bucket.end(), value) != bucket.end()) continue;
            bucket.push_back(value);
            std::string colname = i < static_cast<int>(table.columns.size())
                                      ? table.columns[i].name
                                      : ("col" + std::to_string(i));
            cells.push_back(CellRef{table.name, colname, value});
        }
    }
    sqlite3_finalize(stmt);
    return cells;
}

}  // namespace repgen
