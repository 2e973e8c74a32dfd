#include "repgen/prompt_library.hpp"

#include <filesystem>

#include "repgen/errors.hpp"
#include "repgen/util.hpp"

namespace repgen {

namespace fs = std::filesystem;

PromptLibrary::PromptLibrary(std::string templates_dir) : dir_(std::move(templates_dir)) {}

std::string PromptLibrary::raw(const std::string& name) const {
    auto it = cache_.find(name);
    if (it != cache_.end()) return it->second;
    fs::path p = fs::path(dir_) / (name + ".txt");
    if (!fs::exists(p)) {
        throw TemplateMissing(name + " (looked for " + p.string() + ")");
    }
    std::string text = read_file(p.string());
    cache_[name] = text;
    return text;
}

std::string PromptLibrary::render(const std::string& name,
                                  const std::map<std::string, std::string>& vars) const {
    return substitute(raw(name), vars);
}

std::string PromptLibrary::substitute(std::string text,
                                      const std::map<std::string, std::string>& vars) {
    for (const auto& [key, value] : vars) {
        std::string needle = "{{" + key + "}}";
        size_t pos = 0;
        while ((pos = text.find(needle, pos)) != std::string::npos) {
            text.replace(pos, needle.size(), value);
            pos += value.size();
        }
    }
    return text;
}

}  // namespace repgen
