#include "repgen/sql_analyzer.hpp"

#include <algorithm>
#include <cctype>
#include <memory>
#include <optional>
#include <unordered_set>

#include "repgen/errors.hpp"
#include "repgen/util.hpp"

namespace repgen {

namespace {

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

enum class Tok { Word, QuotedIdent, Number, String, Punct, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;   // raw text (unquoted for QuotedIdent/String)
    std::string upper;  // uppercased text for Word tokens
    size_t pos = 0;
};

struct LexError {
    std::string message;
};

class Lexer {
public:
    explicit Lexer(const std::string& sql) : s_(sql) { scan(); }

    bool failed() const { return !error_.empty(); }
    const std::string& error() const { return error_; }
    const std::vector<Token>& tokens() const { return tokens_; }

private:
    void scan() {
        size_t i = 0;
        const size_t n = s_.size();
        while (i < n) {
            char c = s_[i];
            if (std::isspace(static_cast<unsigned char>(c))) {
                ++i;
                continue;
            }
            if (c == '-' && i + 1 < n && s_[i + 1] == '-') {
                while (i < n && s_[i] != '\n') ++i;
                continue;
            }
            if (c == '/' && i + 1 < n && s_[i + 1] == '*') {
                size_t end = s_.find("*/", i + 2);
                if (end == std::string::npos) {
                    error_ = "unterminated block comment";
                    return;
                }
                i = end + 2;
                continue;
            }
            if (c == '\'') {
                size_t start = i++;
                std::string val;
                bool closed = false;
                while (i < n) {
                    if (s_[i] == '\'') {
                        if (i + 1 < n && s_[i + 1] == '\'') {
                            val.push_back('\'');
                            i += 2;
                        } else {
                            ++i;
                            closed = true;
                            break;
                        }
                    } else {
                        val.push_back(s_[i++]);
                    }
                }
                if (!closed) {
                    error_ = "unterminated string literal";
                    return;
                }
                push(Tok::String, val, start);
                continue;
            }
            if (c == '"' || c == '`' || c == '[') {
                char close = c == '[' ? ']' : c;
                size_t start = i++;
                std::string val;
                bool closed = false;
                while (i < n) {
                    if (s_[i] == close) {
                        if (close != ']' && i + 1 < n && s_[i + 1] == close) {
                            val.push_back(close);
                            i += 2;
                        } else {
                            ++i;
                            closed = true;
                            break;
                        }
                    } else {
                        val.push_back(s_[i++]);
                    }
                }
                if (!closed) {
                    error_ = "unterminated quoted identifier";
                    return;
                }
                push(Tok::QuotedIdent, val, start);
                continue;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) ||
                (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(s_[i + 1])))) {
                size_t start = i;
                while (i < n && (std::isalnum(static_cast<unsigned char>(s_[i])) || s_[i] == '.' ||
                                 ((s_[i] == '+' || s_[i] == '-') && i > start &&
                                  (s_[i - 1] == 'e' || s_[i - 1] == 'E'))))
                    ++i;
                push(Tok::Number, s_.substr(start, i - start), start);
                continue;
            }
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                size_t start = i;
                while (i < n && (std::isalnum(static_cast<unsigned char>(s_[i])) || s_[i] == '_' ||
                                 s_[i] == '$'))
                    ++i;
                push(Tok::Word, s_.substr(start, i - start), start);
                continue;
            }
            // multi-char operators first
            static const char* two[] = {"<=", ">=", "<>", "!=", "==", "||"};
            bool matched = false;
            for (const char* op : two) {
                if (c == op[0] && i + 1 < n && s_[i + 1] == op[1]) {
                    push(Tok::Punct, std::string(op), i);
                    i += 2;
                    matched = true;
                    break;
                }
            }
            if (matched) continue;
            static const std::string singles = "(),.;*=<>+-/%|&~";
            if (singles.find(c) != std::string::npos) {
                push(Tok::Punct, std::string(1, c), i);
                ++i;
                continue;
            }
            error_ = std::string("unexpected character '") + c + "'";
            return;
        }
        push(Tok::End, "", n);
    }

    void push(Tok kind, std::string text, size_t pos) {
        Token t;
        t.kind = kind;
        t.text = std::move(text);
        if (kind == Tok::Word) t.upper = [&] {
            std::string u = t.text;
            std::transform(u.begin(), u.end(), u.begin(),
                           [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
            return u;
        }();
        t.pos = pos;
        tokens_.push_back(std::move(t));
    }

    const std::string& s_;
    std::vector<Token> tokens_;
    std::string error_;
};

const std::unordered_set<std::string>& keywords() {
    static const std::unordered_set<std::string> kw = {
        "SELECT", "FROM", "WHERE", "GROUP", "BY", "HAVING", "ORDER", "LIMIT", "OFFSET",
        "AS", "ON", "USING", "JOIN", "LEFT", "RIGHT", "FULL", "OUTER", "INNER", "CROSS",
        "NATURAL", "UNION", "INTERSECT", "EXCEPT", "ALL", "DISTINCT", "AND", "OR", "NOT",
        "IN", "IS", "NULL", "LIKE", "GLOB", "REGEXP", "MATCH", "BETWEEN", "EXISTS", "CASE",
        "WHEN", "THEN", "ELSE", "END", "CAST", "ASC", "DESC", "TRUE", "FALSE", "ESCAPE",
        "COLLATE", "WITH", "RECURSIVE", "VALUES", "CURRENT_DATE", "CURRENT_TIME",
        "CURRENT_TIMESTAMP",
    };
    return kw;
}

bool is_keyword(const Token& t) {
    return t.kind == Tok::Word && keywords().count(t.upper) > 0;
}

// ---------------------------------------------------------------------------
// Parse model: per-SELECT-core scope with collected identifier references.
// ---------------------------------------------------------------------------

struct ScopeEntry {
    std::string key;    // lowercased alias (or table name when unaliased)
    std::string table;  // physical table name as written; empty for subquery/CTE
    bool wildcard = false;  // subquery or CTE scope: accepts any column
};

struct ColRef {
    std::string qualifier;  // as written, empty when unqualified
    std::string name;       // as written; "*" for qualified star
};

struct Core {
    std::vector<ScopeEntry> from;
    std::vector<ColRef> refs;
    std::vector<std::string> select_aliases;  // lowercased
    int parent = -1;
};

struct ParseResult {
    std::vector<Core> cores;
    std::vector<std::string> cte_names;  // lowercased
};

class Parser {
public:
    Parser(const std::vector<Token>& toks, ParseResult& out) : toks_(toks), out_(out) {}

    // Throws std::runtime_error with a message on syntax errors.
    void parse_statement() {
        if (at_word("WITH")) parse_with_clause();
        if (!at_word("SELECT")) {
            throw err("expected SELECT, got '" + cur().text + "'");
        }
        parse_select(-1);
        if (at_punct(";")) advance();
        if (cur().kind != Tok::End) {
            throw err("trailing input after statement: '" + cur().text + "'");
        }
    }

private:
    void parse_with_clause() {
        expect_word("WITH");
        if (at_word("RECURSIVE")) advance();
        while (true) {
            Token name = expect_identifier("CTE name");
            out_.cte_names.push_back(lowercase(name.text));
            if (at_punct("(")) {  // optional column list
                advance();
                while (!at_punct(")")) {
                    expect_identifier("CTE column");
                    if (at_punct(",")) advance();
                }
                expect_punct(")");
            }
            expect_word("AS");
            expect_punct("(");
            if (!at_word("SELECT") && !at_word("WITH")) throw err("expected SELECT in CTE body");
            if (at_word("WITH")) parse_with_clause();
            parse_select(-1);
            expect_punct(")");
            if (at_punct(",")) {
                advance();
                continue;
            }
            break;
        }
    }

    // select := core ((UNION|INTERSECT|EXCEPT) [ALL] core)* [ORDER BY ...] [LIMIT ...]
    void parse_select(int parent) {
        int first = parse_core(parent);
        while (at_word("UNION") || at_word("INTERSECT") || at_word("EXCEPT")) {
            advance();
            if (at_word("ALL")) advance();
            if (!at_word("SELECT")) throw err("expected SELECT after set operator");
            parse_core(parent);
        }
        parse_order_limit(first);
    }

    int parse_core(int parent) {
        expect_word("SELECT");
        int core_idx = static_cast<int>(out_.cores.size());
        out_.cores.emplace_back();
        out_.cores[core_idx].parent = parent;

        if (at_word("DISTINCT") || at_word("ALL")) advance();

        // select list
        while (true) {
            parse_select_item(core_idx);
            if (at_punct(",")) {
                advance();
                continue;
            }
            break;
        }

        if (at_word("FROM")) {
            advance();
            parse_table_refs(core_idx);
        }
        if (at_word("WHERE")) {
            advance();
            parse_expr(core_idx);
        }
        if (at_word("GROUP")) {
            advance();
            expect_word("BY");
            parse_expr_list(core_idx);
        }
        if (at_word("HAVING")) {
            advance();
            parse_expr(core_idx);
        }
        parse_order_limit(core_idx);
        return core_idx;
    }

    void parse_order_limit(int core_idx) {
        if (at_word("ORDER")) {
            advance();
            expect_word("BY");
            while (true) {
                parse_expr(core_idx);
                if (at_word("ASC") || at_word("DESC")) advance();
                if (at_punct(",")) {
                    advance();
                    continue;
                }
                break;
            }
        }
        if (at_word("LIMIT")) {
            advance();
            parse_expr(core_idx);
            if (at_word("OFFSET")) {
                advance();
                parse_expr(core_idx);
            } else if (at_punct(",")) {
                advance();
                parse_expr(core_idx);
            }
        }
    }

    void parse_select_item(int core_idx) {
        if (at_punct("*")) {
            advance();
            return;
        }
        // qualified star: ident.*
        if (is_identifier(cur()) && peek(1).kind == Tok::Punct && peek(1).text == "." &&
            peek(2).kind == Tok::Punct && peek(2).text == "*") {
            out_.cores[core_idx].refs.push_back({cur().text, "*"});
            advance();
            advance();
            advance();
            return;
        }
        parse_expr(core_idx);
        if (at_word("AS")) {
            advance();
            Token alias = expect_identifier("alias");
            out_.cores[core_idx].select_aliases.push_back(lowercase(alias.text));
        } else if (is_identifier(cur()) && !is_keyword(cur())) {
            out_.cores[core_idx].select_aliases.push_back(lowercase(cur().text));
            advance();
        }
    }

    void parse_table_refs(int core_idx) {
        parse_table_ref(core_idx);
        while (true) {
            if (at_punct(",")) {
                advance();
                parse_table_ref(core_idx);
                continue;
            }
            bool is_join = false;
            while (at_word("LEFT") || at_word("RIGHT") || at_word("FULL") || at_word("INNER") ||
                   at_word("OUTER") || at_word("CROSS") || at_word("NATURAL")) {
                advance();
                is_join = true;
            }
            if (at_word("JOIN")) {
                advance();
                parse_table_ref(core_idx);
                if (at_word("ON")) {
                    advance();
                    parse_expr(core_idx);
                } else if (at_word("USING")) {
                    advance();
                    expect_punct("(");
                    while (!at_punct(")")) {
                        Token col = expect_identifier("USING column");
                        out_.cores[core_idx].refs.push_back({"", col.text});
                        if (at_punct(",")) advance();
                    }
                    expect_punct(")");
                }
                continue;
            }
            if (is_join) throw err("expected JOIN");
            break;
        }
    }

    void parse_table_ref(int core_idx) {
        if (at_punct("(")) {
            advance();
            if (!at_word("SELECT") && !at_word("WITH")) throw err("expected subquery after '('");
            if (at_word("WITH")) parse_with_clause();
            parse_select(core_idx);
            expect_punct(")");
            std::string alias;
            if (at_word("AS")) {
                advance();
                alias = expect_identifier("subquery alias").text;
            } else if (is_identifier(cur()) && !is_keyword(cur())) {
                alias = cur().text;
                advance();
            }
            ScopeEntry e;
            e.key = lowercase(alias);
            e.wildcard = true;
            out_.cores[core_idx].from.push_back(std::move(e));
            return;
        }
        Token name = expect_identifier("table name");
        ScopeEntry e;
        e.table = name.text;
        e.key = lowercase(name.text);
        if (at_word("AS")) {
            advance();
            e.key = lowercase(expect_identifier("table alias").text);
        } else if (is_identifier(cur()) && !is_keyword(cur())) {
            e.key = lowercase(cur().text);
            advance();
        }
        out_.cores[core_idx].from.push_back(std::move(e));
    }

    void parse_expr_list(int core_idx) {
        parse_expr(core_idx);
        while (at_punct(",")) {
            advance();
            parse_expr(core_idx);
        }
    }

    // Lenient expression grammar: operand (op operand)*. We validate shape
    // and collect identifier references; precedence is irrelevant here.
    void parse_expr(int core_idx) {
        parse_operand(core_idx);
        while (true) {
            if (at_any_punct({"+", "-", "*", "/", "%", "=", "==", "!=", "<>", "<", "<=", ">",
                              ">=", "||", "&", "|"})) {
                advance();
                parse_operand(core_idx);
                continue;
            }
            if (at_word("AND") || at_word("OR") || at_word("LIKE") || at_word("GLOB") ||
                at_word("REGEXP") || at_word("MATCH") || at_word("BETWEEN") ||
                at_word("ESCAPE") || at_word("COLLATE")) {
                bool collate = at_word("COLLATE");
                advance();
                if (collate) {
                    expect_identifier("collation name");
                    continue;
                }
                parse_operand(core_idx);
                continue;
            }
            if (at_word("IS")) {
                advance();
                if (at_word("NOT")) advance();
                if (at_word("NULL")) {
                    advance();
                } else {
                    parse_operand(core_idx);
                }
                continue;
            }
            if (at_word("NOT")) {
                advance();
                if (at_word("IN")) {
                    advance();
                    parse_in_rhs(core_idx);
                    continue;
                }
                if (at_word("LIKE") || at_word("GLOB") || at_word("BETWEEN")) {
                    advance();
                    parse_operand(core_idx);
                    continue;
                }
                throw err("unexpected NOT");
            }
            if (at_word("IN")) {
                advance();
                parse_in_rhs(core_idx);
                continue;
            }
            break;
        }
    }

    void parse_in_rhs(int core_idx) {
        expect_punct("(");
        if (at_word("SELECT") || at_word("WITH")) {
            if (at_word("WITH")) parse_with_clause();
            parse_select(core_idx);
        } else {
            parse_expr_list(core_idx);
        }
        expect_punct(")");
    }

    void parse_operand(int core_idx) {
        if (at_punct("-") || at_punct("+") || at_punct("~")) {
            advance();
            parse_operand(core_idx);
            return;
        }
        if (at_word("NOT")) {
            advance();
            parse_operand(core_idx);
            return;
        }
        if (cur().kind == Tok::Number || cur().kind == Tok::String) {
            advance();
            return;
        }
        if (at_word("NULL") || at_word("TRUE") || at_word("FALSE") || at_word("CURRENT_DATE") ||
            at_word("CURRENT_TIME") || at_word("CURRENT_TIMESTAMP")) {
            advance();
            return;
        }
        if (at_word("EXISTS")) {
            advance();
            expect_punct("(");
            if (!at_word("SELECT") && !at_word("WITH")) throw err("expected subquery in EXISTS");
            if (at_word("WITH")) parse_with_clause();
            parse_select(core_idx);
            expect_punct(")");
            return;
        }
        if (at_word("CASE")) {
            advance();
            if (!at_word("WHEN")) parse_expr(core_idx);
            while (at_word("WHEN")) {
                advance();
                parse_expr(core_idx);
                expect_word("THEN");
                parse_expr(core_idx);
            }
            if (at_word("ELSE")) {
                advance();
                parse_expr(core_idx);
            }
            expect_word("END");
            return;
        }
        if (at_word("CAST")) {
            advance();
            expect_punct("(");
            parse_expr(core_idx);
            expect_word("AS");
            // type name: one or more words plus optional (n[,m])
            if (!is_identifier(cur()) && !is_keyword(cur())) throw err("expected type name");
            while (cur().kind == Tok::Word) advance();
            if (at_punct("(")) {
                advance();
                while (!at_punct(")")) advance_checked("type arguments");
                expect_punct(")");
            }
            expect_punct(")");
            return;
        }
        if (at_punct("(")) {
            advance();
            if (at_word("SELECT") || at_word("WITH")) {
                if (at_word("WITH")) parse_with_clause();
                parse_select(core_idx);
            } else {
                parse_expr_list(core_idx);
            }
            expect_punct(")");
            return;
        }
        if (is_identifier(cur()) && !is_keyword(cur())) {
            Token first = cur();
            advance();
            if (at_punct("(")) {  // function call
                advance();
                if (at_word("DISTINCT")) advance();
                if (at_punct("*")) {
                    advance();
                } else if (!at_punct(")")) {
                    parse_expr_list(core_idx);
                }
                expect_punct(")");
                return;
            }
            if (at_punct(".")) {
                advance();
                if (at_punct("*")) {
                    advance();
                    out_.cores[core_idx].refs.push_back({first.text, "*"});
                    return;
                }
                Token col = expect_identifier("column name");
                out_.cores[core_idx].refs.push_back({first.text, col.text});
                return;
            }
            out_.cores[core_idx].refs.push_back({"", first.text});
            return;
        }
        throw err("unexpected token '" + (cur().kind == Tok::End ? "<end>" : cur().text) + "'");
    }

    // --- token helpers ---
    const Token& cur() const { return toks_[idx_]; }
    const Token& peek(size_t k) const {
        return toks_[std::min(idx_ + k, toks_.size() - 1)];
    }
    void advance() {
        if (idx_ + 1 < toks_.size()) ++idx_;
    }
    void advance_checked(const char* what) {
        if (cur().kind == Tok::End) throw err(std::string("unterminated ") + what);
        advance();
    }
    bool at_word(const char* w) const { return cur().kind == Tok::Word && cur().upper == w; }
    bool at_punct(const char* p) const { return cur().kind == Tok::Punct && cur().text == p; }
    bool at_any_punct(std::initializer_list<const char*> ps) const {
        for (const char* p : ps)
            if (at_punct(p)) return true;
        return false;
    }
    static bool is_identifier(const Token& t) {
        return t.kind == Tok::Word || t.kind == Tok::QuotedIdent;
    }
    Token expect_identifier(const char* what) {
        if (!is_identifier(cur()) || (cur().kind == Tok::Word && is_keyword(cur())))
            throw err(std::string("expected ") + what + ", got '" + cur().text + "'");
        Token t = cur();
        advance();
        return t;
    }
    void expect_word(const char* w) {
        if (!at_word(w)) throw err(std::string("expected ") + w + ", got '" + cur().text + "'");
        advance();
    }
    void expect_punct(const char* p) {
        if (!at_punct(p)) throw err(std::string("expected '") + p + "', got '" + cur().text + "'");
        advance();
    }
    std::runtime_error err(const std::string& msg) const { return std::runtime_error(msg); }

    const std::vector<Token>& toks_;
    ParseResult& out_;
    size_t idx_ = 0;
};

bool parse_sql(const std::string& sql, ParseResult& out, std::string& error) {
    Lexer lex(sql);
    if (lex.failed()) {
        error = lex.error();
        return false;
    }
    try {
        Parser p(lex.tokens(), out);
        p.parse_statement();
    } catch (const std::runtime_error& e) {
        error = e.what();
        return false;
    }
    return true;
}

// Scope entries visible from a core: its own plus every ancestor's.
std::vector<const ScopeEntry*> visible_scope(const ParseResult& pr, int core_idx) {
    std::vector<const ScopeEntry*> scope;
    for (int i = core_idx; i >= 0; i = pr.cores[i].parent) {
        for (const auto& e : pr.cores[i].from) scope.push_back(&e);
    }
    return scope;
}

bool is_cte(const ParseResult& pr, const std::string& lower_name) {
    return std::find(pr.cte_names.begin(), pr.cte_names.end(), lower_name) != pr.cte_names.end();
}

}  // namespace

ValidationVerdict validate_sql(const std::string& sql, const SchemaCatalog& catalog) {
    ParseResult pr;
    std::string error;
    if (!parse_sql(sql, pr, error)) return ValidationVerdict::parse_error(error);

    for (size_t ci = 0; ci < pr.cores.size(); ++ci) {
        const Core& core = pr.cores[ci];
        // FROM entries must name catalog tables (or CTEs).
        for (const auto& e : core.from) {
            if (e.wildcard) continue;
            if (is_cte(pr, lowercase(e.table))) continue;
            if (!catalog.find_table(e.table)) return ValidationVerdict::unknown_identifier(e.table);
        }
        auto scope = visible_scope(pr, static_cast<int>(ci));
        // Select aliases from this core and ancestors are legal references.
        std::unordered_set<std::string> aliases;
        for (int i = static_cast<int>(ci); i >= 0; i = pr.cores[i].parent) {
            for (const auto& a : pr.cores[i].select_aliases) aliases.insert(a);
        }
        for (const auto& ref : core.refs) {
            if (!ref.qualifier.empty()) {
                std::string q = lowercase(ref.qualifier);
                const ScopeEntry* entry = nullptr;
                for (const auto* e : scope) {
                    if (e->key == q) {
                        entry = e;
                        break;
                    }
                }
                if (!entry) return ValidationVerdict::unknown_identifier(ref.qualifier);
                if (entry->wildcard || ref.name == "*") continue;
                const TableSchema* t =
                    is_cte(pr, lowercase(entry->table)) ? nullptr : catalog.find_table(entry->table);
                if (!t) continue;  // CTE columns are not tracked
                if (!t->find_column(ref.name)) return ValidationVerdict::unknown_identifier(ref.name);
            } else {
                if (aliases.count(lowercase(ref.name))) continue;
                bool found = false;
                for (const auto* e : scope) {
                    if (e->wildcard || is_cte(pr, lowercase(e->table))) {
                        found = true;
                        break;
                    }
                    const TableSchema* t = catalog.find_table(e->table);
                    if (t && t->find_column(ref.name)) {
                        found = true;
                        break;
                    }
                }
                if (!found) return ValidationVerdict::unknown_identifier(ref.name);
            }
        }
    }
    return ValidationVerdict::okay();
}

SqlIdentifiers extract_sql_identifiers(const std::string& sql) {
    ParseResult pr;
    std::string error;
    if (!parse_sql(sql, pr, error)) throw ParseFailure(error + " in: " + sql);

    SqlIdentifiers out;
    auto add_table = [&](const std::string& t) {
        std::string lt = lowercase(t);
        if (std::find(out.tables.begin(), out.tables.end(), lt) == out.tables.end())
            out.tables.push_back(lt);
    };
    auto add_column = [&](const std::string& t, const std::string& c) {
        std::string qualified = lowercase(t) + "." + lowercase(c);
        if (std::find(out.columns.begin(), out.columns.end(), qualified) == out.columns.end())
            out.columns.push_back(qualified);
    };

    for (size_t ci = 0; ci < pr.cores.size(); ++ci) {
        const Core& core = pr.cores[ci];
        for (const auto& e : core.from) {
            if (!e.table.empty() && !is_cte(pr, lowercase(e.table))) add_table(e.table);
        }
        auto scope = visible_scope(pr, static_cast<int>(ci));
        std::unordered_set<std::string> aliases;
        for (int i = static_cast<int>(ci); i >= 0; i = pr.cores[i].parent) {
            for (const auto& a : pr.cores[i].select_aliases) aliases.insert(a);
        }
        // Physical tables visible from this core, used to place unqualified columns.
        std::vector<std::string> physical;
        for (const auto* e : scope) {
            if (!e->table.empty() && !is_cte(pr, lowercase(e->table))) physical.push_back(e->table);
        }
        for (const auto& ref : core.refs) {
            if (ref.name == "*") {
                continue;  // qualified star carries no column name
            }
            if (!ref.qualifier.empty()) {
                std::string q = lowercase(ref.qualifier);
                for (const auto* e : scope) {
                    if (e->key == q && !e->table.empty() && !is_cte(pr, lowercase(e->table))) {
                        add_column(e->table, ref.name);
                        break;
                    }
                }
                continue;
            }
            if (aliases.count(lowercase(ref.name))) continue;
            if (physical.size() == 1) {
                add_column(physical[0], ref.name);
            } else if (physical.size() > 1) {
                out.warnings.push_back("ambiguous unqualified column dropped: " + ref.name);
            }
        }
    }
    return out;
}

std::string normalize_sql(const std::string& sql) {
    std::string out;
    out.reserve(sql.size());
    bool in_space = true;
    for (char ch : sql) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            if (!in_space && !out.empty()) {
                out.push_back(' ');
                in_space = true;
            }
        } else {
            out.push_back(static_cast<char>(std::tolower(c)));
            in_space = false;
        }
    }
    while (!out.empty() && (out.back() == ' ' || out.back() == ';')) out.pop_back();
    return out;
}

}  // namespace repgen
