#pragma once

#include <stdexcept>
#include <string>

namespace repgen {

// Base for all typed failures; `code()` is the stable machine-readable name
// printed by the CLI on stderr.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& msg)
        : std::runtime_error(code + ": " + msg), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

#define REPGEN_DEFINE_ERROR(Name)                                    \
    class Name : public Error {                                      \
    public:                                                          \
        explicit Name(const std::string& msg) : Error(#Name, msg) {} \
    }

REPGEN_DEFINE_ERROR(ConnectionFailed);
REPGEN_DEFINE_ERROR(EmptyDatabase);
REPGEN_DEFINE_ERROR(BackendUnavailable);
REPGEN_DEFINE_ERROR(ScriptMiss);
REPGEN_DEFINE_ERROR(DimensionMismatch);
REPGEN_DEFINE_ERROR(StorageFailure);
REPGEN_DEFINE_ERROR(EmptyRegistry);
REPGEN_DEFINE_ERROR(UnparseableResponse);
REPGEN_DEFINE_ERROR(SqlGenerationFailed);
REPGEN_DEFINE_ERROR(PipelineFailed);
REPGEN_DEFINE_ERROR(JudgeUnavailable);
REPGEN_DEFINE_ERROR(UnparseableScore);
REPGEN_DEFINE_ERROR(NoQuestionsParsed);
REPGEN_DEFINE_ERROR(EmptyInput);
REPGEN_DEFINE_ERROR(ParseFailure);
REPGEN_DEFINE_ERROR(TemplateMissing);
REPGEN_DEFINE_ERROR(ConfigError);

#undef REPGEN_DEFINE_ERROR

}  // namespace repgen
