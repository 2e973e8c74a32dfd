#include "repgen/llm_gateway.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "repgen/errors.hpp"
#include "repgen/util.hpp"

namespace repgen {

using nlohmann::json;

double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
    if (u.dims() != v.dims()) {
        throw DimensionMismatch("cosine over " + std::to_string(u.dims()) + " vs " +
                                std::to_string(v.dims()) + " dims");
    }
    double dot = 0.0;
    for (size_t i = 0; i < u.dims(); ++i) dot += u.values[i] * v.values[i];
    return std::clamp(dot, -1.0, 1.0);
}

std::vector<double> mock_embedding(const std::string& text, std::uint64_t seed, int dims) {
    std::vector<double> v(static_cast<size_t>(dims));
    std::uint64_t h = fnv1a64(text) ^ splitmix64(seed);
    for (int i = 0; i < dims; ++i) {
        std::uint64_t x = splitmix64(h + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(i + 1));
        // top 53 bits -> [0,1) -> [-1,1)
        double u = static_cast<double>(x >> 11) * (1.0 / 9007199254740992.0);
        v[static_cast<size_t>(i)] = 2.0 * u - 1.0;
    }
    return v;
}

MockBackend::MockBackend(MockOptions opts) : opts_(std::move(opts)) {}

MockOptions MockBackend::options_from_script_file(const std::string& path, std::uint64_t seed,
                                                  int dims, bool strict) {
    MockOptions o;
    o.seed = seed;
    o.dims = dims;
    o.strict = strict;
    json j = json::parse(read_file(path));
    for (auto it = j.begin(); it != j.end(); ++it) {
        o.script[it.key()] = it.value().get<std::string>();
    }
    return o;
}

std::string MockBackend::prompt_digest(const std::string& prompt) { return digest64_hex(prompt); }

std::string MockBackend::fallback_echo(const std::string& prompt) {
    std::string head = prompt.substr(0, 96);
    std::replace(head.begin(), head.end(), '\n', ' ');
    return "MOCK-ECHO " + prompt_digest(prompt) + " :: " + head;
}

std::string MockBackend::complete(const std::string& prompt, const ChatParams&) {
    auto it = opts_.script.find(prompt_digest(prompt));
    if (it != opts_.script.end()) return it->second;
    if (opts_.strict) {
        throw ScriptMiss("no scripted response for prompt digest " + prompt_digest(prompt));
    }
    return fallback_echo(prompt);
}

std::vector<double> MockBackend::embed_raw(const std::string& text) {
    return mock_embedding(text, opts_.seed, opts_.dims);
}

std::string MockBackend::encoder_id() const {
    return "mock-" + std::to_string(opts_.dims) + "-seed" + std::to_string(opts_.seed);
}

RecordingBackend::RecordingBackend(Responder responder, std::uint64_t seed, int dims)
    : responder_(std::move(responder)), seed_(seed), dims_(dims) {}

std::string RecordingBackend::complete(const std::string& prompt, const ChatParams&) {
    std::string response = responder_(prompt);
    recorded_[MockBackend::prompt_digest(prompt)] = response;
    return response;
}

std::vector<double> RecordingBackend::embed_raw(const std::string& text) {
    return mock_embedding(text, seed_, dims_);
}

std::string RecordingBackend::encoder_id() const {
    return "mock-" + std::to_string(dims_) + "-seed" + std::to_string(seed_);
}

void RecordingBackend::save_script(const std::string& path) const {
    json j = json::object();
    for (const auto& [digest, response] : recorded_) j[digest] = response;
    write_file(path, j.dump(2) + "\n");
}

HttpBackend::HttpBackend(HttpOptions opts) : opts_(std::move(opts)) {
    // split base_url into scheme://host:port and a path prefix
    std::string url = opts_.base_url;
    size_t scheme = url.find("://");
    size_t path_start = scheme == std::string::npos ? url.find('/') : url.find('/', scheme + 3);
    if (path_start == std::string::npos) {
        host_ = url;
        path_prefix_.clear();
    } else {
        host_ = url.substr(0, path_start);
        path_prefix_ = url.substr(path_start);
        while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    }
}

HttpBackend::~HttpBackend() = default;

std::string HttpBackend::post_json(const std::string& path, const std::string& body) {
    int attempts = opts_.retries + 1;
    int backoff = opts_.backoff_ms;
    std::string last_error = "no attempt made";
    for (int i = 0; i < attempts; ++i) {
        if (i > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
            backoff *= 2;
        }
        httplib::Client cli(host_);
        cli.set_connection_timeout(0, opts_.timeout_ms * 1000LL);
        cli.set_read_timeout(opts_.timeout_ms / 1000, (opts_.timeout_ms % 1000) * 1000);
        httplib::Headers headers;
        if (!opts_.api_key.empty()) headers.emplace("Authorization", "Bearer " + opts_.api_key);
        auto res = cli.Post(path_prefix_ + path, headers, body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = "server status " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw BackendUnavailable("status " + std::to_string(res->status) + ": " + res->body);
        }
        return res->body;
    }
    throw BackendUnavailable(last_error + " after " + std::to_string(attempts) + " attempts");
}

std::string HttpBackend::complete(const std::string& prompt, const ChatParams& params) {
    json req;
    req["model"] = params.model_id.empty() ? opts_.chat_model : params.model_id;
    req["messages"] = json::array({json{{"role", "user"}, {"content", prompt}}});
    req["temperature"] = params.temperature;
    req["max_tokens"] = params.max_tokens;
    if (params.adapter_id) req["adapter_id"] = *params.adapter_id;
    json res = json::parse(post_json("/chat/completions", req.dump()));
    try {
        return res.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw BackendUnavailable(std::string("malformed chat response: ") + e.what());
    }
}

std::vector<double> HttpBackend::embed_raw(const std::string& text) {
    json req;
    req["model"] = opts_.embed_model;
    req["input"] = text;
    json res = json::parse(post_json("/embeddings", req.dump()));
    try {
        return res.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw BackendUnavailable(std::string("malformed embedding response: ") + e.what());
    }
}

std::string HttpBackend::encoder_id() const { return "http-" + opts_.embed_model; }

Gateway::Gateway(std::shared_ptr<ChatBackend> backend) : backend_(std::move(backend)) {}

std::string Gateway::complete(const std::string& prompt, const ChatParams& params) const {
    if (prompt.empty()) throw std::invalid_argument("complete: empty prompt");
    return backend_->complete(prompt, params);
}

ChatExchange Gateway::exchange(const std::string& prompt, const ChatParams& params) const {
    ChatExchange ex;
    ex.prompt = prompt;
    ex.params = params;
    ex.response = complete(prompt, params);
    ex.backend = dynamic_cast<HttpBackend*>(backend_.get()) ? "http" : "mock";
    return ex;
}

EmbeddingVector Gateway::embed(const std::string& text) const {
    if (text.empty()) throw std::invalid_argument("embed: empty text");
    EmbeddingVector v;
    v.values = backend_->embed_raw(text);
    double norm2 = 0.0;
    for (double x : v.values) norm2 += x * x;
    if (norm2 < 1e-24) {
        // degenerate vector; pin to the first axis so the result is still unit
        if (!v.values.empty()) v.values[0] = 1.0;
        return v;
    }
    double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v.values) x *= inv;
    return v;
}

std::string Gateway::encoder_id() const { return backend_->encoder_id(); }

}  // namespace repgen
