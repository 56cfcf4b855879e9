#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// UTF-8 helpers shared by the tokenizer, title de-duplication and the
// de-identification offset conversions.
namespace drafter::text {

/// Decodes UTF-8; malformed bytes decode to U+FFFD one byte at a time.
std::u32string decode_utf8(std::string_view bytes);
std::string encode_utf8(std::u32string_view cps);
void append_utf8(std::string& out, char32_t cp);

/// Simple (one-to-one) lowercase mapping for Latin, Greek, Cyrillic and
/// Armenian blocks plus fullwidth ASCII. Other code points map to themselves.
char32_t to_lower(char32_t cp) noexcept;
std::string to_lower_utf8(std::string_view bytes);

bool is_space(char32_t cp) noexcept;
bool is_punct(char32_t cp) noexcept;

std::vector<std::string> split_whitespace(std::string_view text);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string trim(std::string_view text);
std::string rtrim(std::string_view text);

/// Byte offset of the code point with the given index (clamped to size).
std::size_t byte_offset_of_codepoint(std::string_view bytes, std::size_t cp_index);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0) noexcept;

}  // namespace drafter::text
