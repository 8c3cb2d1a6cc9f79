#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace shortdesc::corpus {

// NFC, internal whitespace runs collapsed to a single space, trimmed.
std::string normalize_text(std::string_view utf8);

// Text up to the first blank line, normalized. Single line breaks inside the
// paragraph become spaces.
std::string first_paragraph(std::string_view utf8);

// Splits on Unicode whitespace; empty pieces are dropped.
std::vector<std::string> split_words(std::string_view utf8);

// Number of Unicode code points after normalization, whitespace excluded.
std::size_t count_characters(std::string_view utf8);

// First n code points of the normalized text (spaces kept, trailing space trimmed).
std::string take_characters(std::string_view utf8, std::size_t n);

// Case-folded normalized text, for "equal up to capitalization" checks.
std::string fold_case(std::string_view utf8);

std::string join(const std::vector<std::string>& words, std::string_view sep = " ");

}  // namespace shortdesc::corpus
