#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace repgen {

// 64-bit FNV-1a. Used for prompt digests, artifact digests and question ids;
// stability across platforms matters more than collision resistance here.
std::uint64_t fnv1a64(std::string_view data);

// splitmix64 mixer, used by the mock embedding fold.
std::uint64_t splitmix64(std::uint64_t x);

std::string to_hex16(std::uint64_t v);

// digest64_hex(s) == to_hex16(fnv1a64(s))
std::string digest64_hex(std::string_view data);

std::string lowercase(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

// Splits free text into lowercase word tokens ([a-z0-9_]+ runs).
std::vector<std::string> word_tokens(std::string_view text);

bool is_stopword(const std::string& lower_word);

// Content words of a text: word tokens minus stopwords, order preserved.
std::vector<std::string> content_words(std::string_view text);

std::string now_iso8601_utc();

// Reads a whole file; throws std::runtime_error when missing.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace repgen
