#pragma once

#include <string>
#include <vector>

#include "repgen/schema_catalog.hpp"

namespace repgen {

struct ValidationVerdict {
    enum class Kind { Ok, ParseError, UnknownIdentifier };
    Kind kind = Kind::Ok;
    std::string message;  // set for parse_error
    std::string name;     // set for unknown_identifier

    bool ok() const { return kind == Kind::Ok; }
    static ValidationVerdict okay() { return {}; }
    static ValidationVerdict parse_error(std::string msg) {
        return {Kind::ParseError, std::move(msg), {}};
    }
    static ValidationVerdict unknown_identifier(std::string n) {
        return {Kind::UnknownIdentifier, {}, std::move(n)};
    }
};

// ok <=> sql parses as a single SELECT statement (WITH...SELECT allowed) and
// every table/column identifier resolves against the catalog. DML/DDL and
// multi-statement inputs are rejected.
ValidationVerdict validate_sql(const std::string& sql, const SchemaCatalog& catalog);

// Identifiers referenced by a SELECT, without a catalog. Tables come from
// FROM/JOIN clauses (subqueries included); columns are fully qualified via
// the enclosing FROM scope. Unqualified columns in a multi-table scope are
// ambiguous and dropped with a warning. Select-list aliases are not columns.
// All names lowercased, deduplicated, insertion order. Throws ParseFailure
// when the statement does not parse.
struct SqlIdentifiers {
    std::vector<std::string> tables;
    std::vector<std::string> columns;  // "table.column"
    std::vector<std::string> warnings;
};
SqlIdentifiers extract_sql_identifiers(const std::string& sql);

// Lowercases, collapses whitespace and strips a trailing ';'. Used to
// deduplicate candidate SQL texts.
std::string normalize_sql(const std::string& sql);

}  // namespace repgen
