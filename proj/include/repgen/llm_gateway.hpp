#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace repgen {

struct ChatParams {
    double temperature = 0.0;
    int max_tokens = 1024;
    std::string model_id;
    std::optional<std::string> adapter_id;  // opaque routing hint
};

// One completed prompt/response round trip.
struct ChatExchange {
    std::string prompt;
    ChatParams params;
    std::string response;
    std::string backend;  // "http" or "mock"
};

struct EmbeddingVector {
    std::vector<double> values;
    size_t dims() const { return values.size(); }
};

// Dot product of unit vectors, clamped to [-1, 1]. Throws DimensionMismatch.
double cosine(const EmbeddingVector& u, const EmbeddingVector& v);

// Provider interface. embed_raw may return unnormalized vectors; the
// Gateway normalizes.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string complete(const std::string& prompt, const ChatParams& params) = 0;
    virtual std::vector<double> embed_raw(const std::string& text) = 0;
    virtual std::string encoder_id() const = 0;
};

// Deterministic embedding used by mock and recording backends: a seeded
// hash of the text folded into a fixed-dims vector (pre-normalization).
std::vector<double> mock_embedding(const std::string& text, std::uint64_t seed, int dims);

struct MockOptions {
    std::uint64_t seed = 0;
    int dims = 64;
    bool strict = false;
    std::map<std::string, std::string> script;  // prompt digest -> response
};

// Scripted offline backend. Responses are keyed by a stable digest of the
// prompt; unscripted prompts either fail (strict) or fall back to a fixed
// echo derived from the prompt.
class MockBackend : public ChatBackend {
public:
    explicit MockBackend(MockOptions opts);

    // Loads a JSON object mapping prompt digests to responses.
    static MockOptions options_from_script_file(const std::string& path, std::uint64_t seed,
                                                int dims, bool strict);

    static std::string prompt_digest(const std::string& prompt);
    static std::string fallback_echo(const std::string& prompt);

    std::string complete(const std::string& prompt, const ChatParams& params) override;
    std::vector<double> embed_raw(const std::string& text) override;
    std::string encoder_id() const override;

private:
    MockOptions opts_;
};

// Answers via a caller-supplied responder and records every exchange.
// `save_script` dumps the recorded map in the mock script file format, so a
// recorded run can be replayed by a strict MockBackend.
class RecordingBackend : public ChatBackend {
public:
    using Responder = std::function<std::string(const std::string& prompt)>;
    RecordingBackend(Responder responder, std::uint64_t seed, int dims);

    std::string complete(const std::string& prompt, const ChatParams& params) override;
    std::vector<double> embed_raw(const std::string& text) override;
    std::string encoder_id() const override;

    const std::map<std::string, std::string>& recorded() const { return recorded_; }
    void save_script(const std::string& path) const;

private:
    Responder responder_;
    std::uint64_t seed_;
    int dims_;
    std::map<std::string, std::string> recorded_;
};

struct HttpOptions {
    std::string base_url;  // e.g. http://localhost:8000/v1
    std::string api_key;
    std::string chat_model = "gpt-4o-mini";
    std::string embed_model = "text-embedding-3-small";
    int retries = 3;
    int backoff_ms = 500;
    int timeout_ms = 30000;
};

// OpenAI-compatible chat/embeddings client. Bounded retries with
// exponential backoff; throws BackendUnavailable when exhausted.
class HttpBackend : public ChatBackend {
public:
    explicit HttpBackend(HttpOptions opts);
    ~HttpBackend() override;

    std::string complete(const std::string& prompt, const ChatParams& params) override;
    std::vector<double> embed_raw(const std::string& text) override;
    std::string encoder_id() const override;

private:
    std::string post_json(const std::string& path, const std::string& body);
    HttpOptions opts_;
    std::string host_;        // scheme://host:port
    std::string path_prefix_;  // e.g. /v1
};

// Front door used by every module: enforces unit-norm embeddings and
// non-empty inputs, and owns the backend.
class Gateway {
public:
    explicit Gateway(std::shared_ptr<ChatBackend> backend);

    std::string complete(const std::string& prompt, const ChatParams& params) const;
    ChatExchange exchange(const std::string& prompt, const ChatParams& params) const;
    EmbeddingVector embed(const std::string& text) const;
    std::string encoder_id() const;

    ChatBackend& backend() const { return *backend_; }

private:
    std::shared_ptr<ChatBackend> backend_;
};

}  // namespace repgen
