#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace repgen {

enum class ColumnType { Integer, Real, Text, Date, Boolean, Other };

std::string column_type_name(ColumnType t);
ColumnType column_type_from_decl(const std::string& declared_type);

struct ColumnSchema {
    std::string name;
    ColumnType data_type = ColumnType::Other;
    std::optional<std::string> comment;
};

struct TableSchema {
    std::string name;
    std::vector<ColumnSchema> columns;
    long long row_count = 0;

    const ColumnSchema* find_column(const std::string& name_ci) const;
};

struct SchemaCatalog {
    std::string db_id;
    std::vector<TableSchema> tables;

    const TableSchema* find_table(const std::string& name_ci) const;
    bool empty() const { return tables.empty(); }

    // One-line-per-table text used in prompts and for the schema digest.
    std::string to_text() const;
    std::string digest() const;
};

// Execution result of one SELECT. `error` set <=> rows and columns empty.
struct SqlOutcome {
    std::string sql;
    std::vector<std::string> columns;
    std::vector<std::vector<nlohmann::json>> rows;
    bool truncated = false;
    long long row_count_total = 0;
    std::optional<std::string> error;

    nlohmann::json to_json() const;
    static SqlOutcome from_json(const nlohmann::json& j);
};

// One sampled cell, identified by (table, column, value-as-text).
struct CellRef {
    std::string table;
    std::string column;
    std::string value;

    bool operator==(const CellRef&) const = default;
};

// Read-mostly handle over an embedded single-file database (SQLite).
// One connection; executions through it are serialized by the caller.
class Database {
public:
    // Opens an existing file read-only. Throws ConnectionFailed if the file
    // is missing or is not a database.
    static Database open(const std::string& path);

    // Creates (or overwrites) a database file and runs a DDL/DML script.
    // Used by fixtures and dataset tooling.
    static Database create(const std::string& path, const std::string& init_script = "");

    Database(Database&&) noexcept;
    Database& operator=(Database&&) noexcept;
    ~Database();

    const std::string& path() const { return path_; }

    void exec_script(const std::string& script);

    // Lists every user table and its columns in storage order.
    // Throws EmptyDatabase when no user tables exist.
    SchemaCatalog introspect() const;

    // Runs a SELECT, keeping at most row_limit rows. Engine-level failures
    // are captured into outcome.error, never thrown.
    SqlOutcome execute(const std::string& sql, long long row_limit) const;

    // Row-major traversal with (column,value) de-duplication, at most
    // `budget` cells. NULL cells are skipped.
    std::vector<CellRef> sample_cells(const TableSchema& table, long long budget) const;

private:
    Database() = default;
    std::string path_;
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace repgen
