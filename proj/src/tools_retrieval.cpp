#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "repgen/errors.hpp"
#include "repgen/tools.hpp"
#include "repgen/util.hpp"

namespace repgen {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Index serialization: binary-free JSON {format_version, encoder_id, entries}
// ---------------------------------------------------------------------------

namespace {

json vector_to_json(const EmbeddingVector& v) { return json(v.values); }

EmbeddingVector vector_from_json(const json& j) {
    EmbeddingVector v;
    v.values = j.get<std::vector<double>>();
    return v;
}

}  // namespace

json SchemaIndex::to_json() const {
    json j;
    j["format_version"] = format_version;
    j["encoder_id"] = encoder_id;
    json entries_j = json::array();
    for (const auto& e : entries) {
        entries_j.push_back(json{{"key", e.table}, {"vector", vector_to_json(e.embedding)}});
    }
    j["entries"] = entries_j;
    return j;
}

SchemaIndex SchemaIndex::from_json(const json& j) {
    SchemaIndex idx;
    idx.format_version = j.at("format_version").get<int>();
    idx.encoder_id = j.at("encoder_id").get<std::string>();
    for (const auto& e : j.at("entries")) {
        idx.entries.push_back(
            {e.at("key").get<std::string>(), vector_from_json(e.at("vector"))});
    }
    return idx;
}

json CellIndex::to_json() const {
    json j;
    j["format_version"] = format_version;
    j["encoder_id"] = encoder_id;
    json entries_j = json::array();
    for (const auto& e : entries) {
        json key{{"table", e.cell.table}, {"column", e.cell.column}, {"value", e.cell.value}};
        entries_j.push_back(json{{"key", key}, {"vector", vector_to_json(e.embedding)}});
    }
    j["entries"] = entries_j;
    return j;
}

CellIndex CellIndex::from_json(const json& j) {
    CellIndex idx;
    idx.format_version = j.at("format_version").get<int>();
    idx.encoder_id = j.at("encoder_id").get<std::string>();
    for (const auto& e : j.at("entries")) {
        const json& key = e.at("key");
        CellIndexEntry entry;
        entry.cell = CellRef{key.at("table").get<std::string>(),
                             key.at("column").get<std::string>(),
                             key.at("value").get<std::string>()};
        entry.embedding = vector_from_json(e.at("vector"));
        idx.entries.push_back(std::move(entry));
    }
    return idx;
}

void save_index(const json& j, const std::string& path) { write_file(path, j.dump(2) + "\n"); }

json load_index(const std::string& path) { return json::parse(read_file(path)); }

// ---------------------------------------------------------------------------
// Domain profile selection
// ---------------------------------------------------------------------------

const DomainProfile& select_domain_profile(const std::string& question,
                                           const std::vector<DomainProfile>& registry,
                                           const Gateway& gateway) {
    if (registry.empty()) throw EmptyRegistry("no domain profiles configured");
    EmbeddingVector qe = gateway.embed(question);
    size_t best = 0;
    double best_score = -2.0;
    for (size_t i = 0; i < registry.size(); ++i) {
        const auto& profile = registry[i];
        double sum = 0.0;
        for (const auto& kw : profile.keywords) sum += cosine(qe, gateway.embed(kw));
        double mean = profile.keywords.empty() ? -1.0 : sum / profile.keywords.size();
        if (mean > best_score) {
            best_score = mean;
            best = i;
        }
    }
    return registry[best];
}

// ---------------------------------------------------------------------------
// Keyword generation
// ---------------------------------------------------------------------------

std::string build_keywords_prompt(const std::string& question, const PromptLibrary& prompts) {
    return prompts.render("keywords", {{"question", question}});
}

std::vector<std::string> generate_keywords(const std::string& question, const ToolContext& ctx) {
    std::vector<std::string> keywords;
    auto add = [&](const std::string& raw) {
        std::string k = lowercase(trim(raw));
        // strip list bullets / numbering the model may add
        while (!k.empty() && (k.front() == '-' || k.front() == '*' || std::isdigit(static_cast<unsigned char>(k.front())) || k.front() == '.' || k.front() == ')'))
            k.erase(k.begin());
        k = trim(k);
        if (k.empty()) return;
        if (std::find(keywords.begin(), keywords.end(), k) != keywords.end()) return;
        if (keywords.size() >= 8) return;
        keywords.push_back(k);
    };

    try {
        std::string response =
            ctx.gateway->complete(build_keywords_prompt(question, *ctx.prompts), ctx.chat);
        for (const auto& line : split(response, '\n')) {
            for (const auto& part : split(line, ',')) add(part);
        }
    } catch (const Error&) {
        // fall through to the lexical fallback
    }

    if (keywords.empty()) {
        for (const auto& w : content_words(question)) {
            if (keywords.size() >= 8) break;
            if (std::find(keywords.begin(), keywords.end(), w) == keywords.end())
                keywords.push_back(w);
        }
    }
    if (keywords.empty()) {
        for (const auto& w : word_tokens(question)) {
            if (keywords.size() >= 8) break;
            keywords.push_back(w);
        }
    }
    if (keywords.empty()) keywords.push_back("data");
    return keywords;
}

// ---------------------------------------------------------------------------
// Index construction
// ---------------------------------------------------------------------------

std::string schema_embedding_text(const TableSchema& table) {
    std::ostringstream ss;
    ss << "table=" << table.name << " | columns=";
    for (size_t i = 0; i < table.columns.size(); ++i) {
        if (i) ss << ", ";
        ss << table.columns[i].name << " (" << column_type_name(table.columns[i].data_type) << ")";
        if (table.columns[i].comment) ss << " -- " << *table.columns[i].comment;
    }
    return ss.str();
}

std::string cell_embedding_text(const CellRef& cell, ColumnType type) {
    return "table=" + cell.table + " | column=" + cell.column + " (" + column_type_name(type) +
           ") | value=" + cell.value;
}

SchemaIndex build_schema_index(const SchemaCatalog& catalog, const Gateway& gateway) {
    SchemaIndex index;
    index.encoder_id = gateway.encoder_id() + "+comments";
    for (const auto& table : catalog.tables) {
        index.entries.push_back({table.name, gateway.embed(schema_embedding_text(table))});
    }
    return index;
}

CellIndex build_cell_index(const SchemaCatalog& catalog, const Database& db,
                           long long per_table_budget, const Gateway& gateway) {
    CellIndex index;
    index.encoder_id = gateway.encoder_id() + "+comments";
    for (const auto& table : catalog.tables) {
        for (const auto& cell : db.sample_cells(table, per_table_budget)) {
            const ColumnSchema* col = table.find_column(cell.column);
            ColumnType type = col ? col->data_type : ColumnType::Other;
            index.entries.push_back({cell, gateway.embed(cell_embedding_text(cell, type))});
        }
    }
    return index;
}

// ---------------------------------------------------------------------------
// Two-phase retrieval (exhaustive scan; fixture scale)
// ---------------------------------------------------------------------------

std::vector<TableHit> retrieve_tables(const std::string& query_text, const SchemaIndex& index,
                                      int k, const Gateway& gateway) {
    EmbeddingVector qe = gateway.embed(query_text);
    std::vector<TableHit> hits;
    hits.reserve(index.entries.size());
    for (const auto& entry : index.entries) {
        hits.push_back({entry.table, cosine(qe, entry.embedding)});
    }
    std::sort(hits.begin(), hits.end(), [](const TableHit& a, const TableHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.table < b.table;
    });
    if (static_cast<int>(hits.size()) > k) hits.resize(static_cast<size_t>(k));
    return hits;
}

std::vector<CellHit> retrieve_cells(const std::string& query_text,
                                    const std::vector<std::string>& selected_tables,
                                    const CellIndex& index, int k, const Gateway& gateway) {
    if (selected_tables.empty() || k <= 0) return {};
    std::unordered_set<std::string> selected;
    for (const auto& t : selected_tables) selected.insert(lowercase(t));

    EmbeddingVector qe = gateway.embed(query_text);
    struct Scored {
        CellHit hit;
        size_t ordinal;
    };
    std::vector<Scored> scored;
    for (size_t i = 0; i < index.entries.size(); ++i) {
        const auto& entry = index.entries[i];
        if (!selected.count(lowercase(entry.cell.table))) continue;
        scored.push_back({{entry.cell, cosine(qe, entry.embedding)}, i});
    }
    std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.hit.score != b.hit.score) return a.hit.score > b.hit.score;
        if (a.hit.cell.table != b.hit.cell.table) return a.hit.cell.table < b.hit.cell.table;
        if (a.hit.cell.column != b.hit.cell.column) return a.hit.cell.column < b.hit.cell.column;
        return a.ordinal < b.ordinal;
    });
    std::vector<CellHit> hits;
    for (size_t i = 0; i < scored.size() && static_cast<int>(i) < k; ++i)
        hits.push_back(scored[i].hit);
    return hits;
}

}  // namespace repgen
