#pragma once

#include <map>
#include <string>

namespace repgen {

// Loads prompt templates from a directory of <name>.txt files and renders
// them with {{placeholder}} substitution. Missing files raise
// TemplateMissing; unknown placeholders are left untouched.
class PromptLibrary {
public:
    explicit PromptLibrary(std::string templates_dir);

    std::string raw(const std::string& name) const;
    std::string render(const std::string& name,
                       const std::map<std::string, std::string>& vars) const;

    static std::string substitute(std::string text,
                                  const std::map<std::string, std::string>& vars);

    const std::string& dir() const { return dir_; }

private:
    std::string dir_;
    mutable std::map<std::string, std::string> cache_;
};

}  // namespace repgen
