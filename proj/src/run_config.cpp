#include "repgen/run_config.hpp"

#include <cstdlib>
#include <filesystem>
#include <map>
#include <sstream>

#include "repgen/errors.hpp"
#include "repgen/util.hpp"

namespace repgen {

namespace fs = std::filesystem;

std::string strategy_mode_name(StrategyMode m) {
    switch (m) {
        case StrategyMode::Both: return "both";
        case StrategyMode::EncodingOnly: return "encoding_only";
        case StrategyMode::SqlOnly: return "sql_only";
    }
    return "both";
}

StrategyMode strategy_mode_from_name(const std::string& name) {
    if (name == "both") return StrategyMode::Both;
    if (name == "encoding_only") return StrategyMode::EncodingOnly;
    if (name == "sql_only") return StrategyMode::SqlOnly;
    throw ConfigError("unknown strategy mode: " + name);
}

std::vector<DomainProfile> default_profiles() {
    return {
        {"finance",
         {"gdp", "deposits", "loans", "assets", "liabilities", "revenue", "savings"},
         "Favor financial metrics, fiscal periods and monetary units.",
         std::nullopt},
        {"healthcare",
         {"patient", "diagnosis", "treatment", "hospital", "clinical"},
         "Favor clinical entities, cohorts and outcomes.",
         std::nullopt},
        {"general", {"data", "records", "values"}, "", std::nullopt},
    };
}

RunConfig RunConfig::defaults() {
    RunConfig c;
    c.profiles = default_profiles();
    return c;
}

namespace {

struct IniFile {
    // section -> key -> value; section order preserved separately
    std::map<std::string, std::map<std::string, std::string>> values;
    std::vector<std::string> section_order;

    bool has(const std::string& sec, const std::string& key) const {
        auto s = values.find(sec);
        return s != values.end() && s->second.count(key) > 0;
    }
    std::string get(const std::string& sec, const std::string& key) const {
        return values.at(sec).at(key);
    }
};

IniFile parse_ini(const std::string& text, const std::string& origin) {
    IniFile ini;
    std::string section;
    int lineno = 0;
    for (const auto& raw : split(text, '\n')) {
        ++lineno;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": unterminated section");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (!ini.values.count(section)) ini.section_order.push_back(section);
            ini.values[section];
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        }
        ini.values[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return ini;
}

bool parse_bool(const std::string& v, const std::string& what) {
    std::string s = lowercase(v);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError("expected boolean for " + what + ", got '" + v + "'");
}

std::string resolve_path(const std::string& value, const fs::path& base) {
    if (value.empty()) return value;
    fs::path p(value);
    if (p.is_absolute()) return p.string();
    return (base / p).lexically_normal().string();
}

}  // namespace

RunConfig RunConfig::load(const std::string& path) {
    RunConfig c = defaults();
    c.seed_set = false;
    IniFile ini = parse_ini(read_file(path), path);
    fs::path base = fs::absolute(fs::path(path)).parent_path();

    auto str = [&](const char* sec, const char* key, std::string& out) {
        if (ini.has(sec, key)) out = ini.get(sec, key);
    };
    auto boolean = [&](const char* sec, const char* key, bool& out) {
        if (ini.has(sec, key)) out = parse_bool(ini.get(sec, key), std::string(sec) + "." + key);
    };
    auto integer = [&](const char* sec, const char* key, auto& out) {
        if (ini.has(sec, key)) {
            try {
                out = static_cast<std::decay_t<decltype(out)>>(std::stoll(ini.get(sec, key)));
            } catch (const std::exception&) {
                throw ConfigError(std::string("bad integer for ") + sec + "." + key);
            }
        }
    };
    auto real = [&](const char* sec, const char* key, double& out) {
        if (ini.has(sec, key)) {
            try {
                out = std::stod(ini.get(sec, key));
            } catch (const std::exception&) {
                throw ConfigError(std::string("bad number for ") + sec + "." + key);
            }
        }
    };

    if (ini.has("backend", "kind")) {
        std::string kind = lowercase(ini.get("backend", "kind"));
        if (kind == "http") c.backend = BackendKind::Http;
        else if (kind == "mock") c.backend = BackendKind::Mock;
        else throw ConfigError("backend.kind must be http or mock, got '" + kind + "'");
    }
    str("backend", "base_url", c.base_url);
    str("backend", "api_key_env", c.api_key_env);
    str("backend", "chat_model", c.chat_model);
    str("backend", "embed_model", c.embed_model);
    str("backend", "local_sql_model", c.local_sql_model);
    if (ini.has("backend", "mock_script")) {
        c.mock_script = resolve_path(ini.get("backend", "mock_script"), base);
    }
    boolean("backend", "mock_strict", c.mock_strict);
    boolean("backend", "mock_echo", c.mock_echo);
    if (ini.has("backend", "seed")) {
        c.seed = static_cast<std::uint64_t>(std::stoull(ini.get("backend", "seed")));
        c.seed_set = true;
    }
    integer("backend", "mock_dims", c.mock_dims);
    integer("backend", "retries", c.retries);
    integer("backend", "backoff_ms", c.backoff_ms);
    integer("backend", "timeout_ms", c.timeout_ms);

    integer("retrieval", "k_tables", c.k_tables);
    integer("retrieval", "k_cells", c.k_cells);
    integer("retrieval", "per_table_budget", c.per_table_budget);

    if (ini.has("sql", "mode")) {
        std::string mode = lowercase(ini.get("sql", "mode"));
        if (mode == "prompt_api") c.sql_mode = SqlGenerator::PromptApi;
        else if (mode == "local_model") c.sql_mode = SqlGenerator::LocalModel;
        else throw ConfigError("sql.mode must be prompt_api or local_model");
    }
    integer("sql", "n_retry", c.n_retry);
    integer("sql", "preview_row_limit", c.preview_row_limit);
    integer("sql", "final_row_limit", c.final_row_limit);

    integer("rewrite", "max_rows", c.rewrite_limits.max_rows);
    integer("rewrite", "max_cols", c.rewrite_limits.max_cols);

    integer("planner", "max_subquestions", c.max_subquestions);
    if (ini.has("planner", "strategy")) {
        c.strategy = strategy_mode_from_name(lowercase(ini.get("planner", "strategy")));
    }

    boolean("memory", "enabled", c.memory_enabled);
    real("memory", "qa_threshold", c.qa_threshold);
    real("memory", "plan_threshold", c.plan_threshold);
    boolean("memory", "regenerate_on_hit", c.regenerate_on_hit);

    if (ini.has("paths", "state_dir")) {
        c.state_dir = resolve_path(ini.get("paths", "state_dir"), base);
    }
    if (ini.has("paths", "templates_dir")) {
        c.templates_dir = resolve_path(ini.get("paths", "templates_dir"), base);
    }

    integer("eval", "n_questions", c.eval_n_questions);
    integer("synth", "group_size", c.synth_group_size);
    integer("synth", "m_candidates", c.synth_m_candidates);

    // profile sections replace the defaults when present
    std::vector<DomainProfile> profiles;
    for (const auto& sec : ini.section_order) {
        if (sec.rfind("profile.", 0) != 0) continue;
        DomainProfile p;
        p.name = sec.substr(8);
        if (ini.has(sec.c_str(), "keywords")) {
            for (auto& k : split(ini.get(sec, "keywords"), ',')) {
                std::string kw = lowercase(trim(k));
                if (!kw.empty()) p.keywords.push_back(kw);
            }
        }
        if (ini.has(sec.c_str(), "overlay")) p.prompt_overlay = ini.get(sec, "overlay");
        if (ini.has(sec.c_str(), "adapter")) {
            std::string a = ini.get(sec, "adapter");
            if (!a.empty()) p.adapter_id = a;
        }
        if (p.keywords.empty()) {
            throw ConfigError("profile." + p.name + " needs a non-empty keywords list");
        }
        profiles.push_back(std::move(p));
    }
    if (!profiles.empty()) c.profiles = std::move(profiles);

    c.validate();
    return c;
}

void RunConfig::validate() const {
    if (backend == BackendKind::Mock) {
        if (!seed_set) throw ConfigError("mock backend requires backend.seed");
        if (mock_script.empty() && !mock_echo) {
            throw ConfigError("mock backend requires backend.mock_script or mock_echo = true");
        }
    }
    if (k_tables < 1 || k_cells < 1) throw ConfigError("retrieval k values must be >= 1");
    if (max_subquestions < 1) throw ConfigError("planner.max_subquestions must be >= 1");
    if (qa_threshold < 0.0 || qa_threshold > 1.0 || plan_threshold < 0.0 || plan_threshold > 1.0) {
        throw ConfigError("memory thresholds must lie in [0,1]");
    }
    if (profiles.empty()) throw ConfigError("at least one domain profile is required");
}

std::string RunConfig::semantic_digest() const {
    std::ostringstream ss;
    ss << "backend=" << (backend == BackendKind::Mock ? "mock" : "http")
       << ";chat=" << chat_model << ";embed=" << embed_model << ";localsql=" << local_sql_model
       << ";seed=" << seed << ";dims=" << mock_dims << ";kt=" << k_tables << ";kc=" << k_cells
       << ";budget=" << per_table_budget << ";sqlmode=" << sql_generator_name(sql_mode)
       << ";nretry=" << n_retry << ";prev=" << preview_row_limit << ";final=" << final_row_limit
       << ";rwrows=" << rewrite_limits.max_rows << ";rwcols=" << rewrite_limits.max_cols
       << ";maxsub=" << max_subquestions << ";strategy=" << strategy_mode_name(strategy)
       << ";mem=" << memory_enabled << ";qat=" << qa_threshold << ";plant=" << plan_threshold
       << ";regen=" << regenerate_on_hit << ";evalq=" << eval_n_questions
       << ";group=" << synth_group_size << ";mcand=" << synth_m_candidates << ";profiles=";
    for (const auto& p : profiles) {
        ss << p.name << "(";
        for (const auto& k : p.keywords) ss << k << ",";
        ss << ")";
    }
    return digest64_hex(ss.str());
}

std::shared_ptr<ChatBackend> RunConfig::make_backend() const {
    validate();
    if (backend == BackendKind::Mock) {
        MockOptions opts;
        opts.seed = seed;
        opts.dims = mock_dims;
        opts.strict = mock_strict;
        if (!mock_script.empty()) {
            opts = MockBackend::options_from_script_file(mock_script, seed, mock_dims, mock_strict);
        }
        return std::make_shared<MockBackend>(std::move(opts));
    }
    HttpOptions opts;
    opts.base_url = base_url;
    opts.chat_model = chat_model;
    opts.embed_model = embed_model;
    opts.retries = retries;
    opts.backoff_ms = backoff_ms;
    opts.timeout_ms = timeout_ms;
    if (const char* key = std::getenv(api_key_env.c_str())) opts.api_key = key;
    return std::make_shared<HttpBackend>(std::move(opts));
}

}  // namespace repgen
