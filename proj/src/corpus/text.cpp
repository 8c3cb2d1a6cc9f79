#include "shortdesc/corpus/text.hpp"

#include <stdexcept>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

namespace shortdesc::corpus {
namespace {

icu::UnicodeString to_nfc(std::string_view utf8) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalizer unavailable");
  icu::UnicodeString src = icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  icu::UnicodeString out = nfc->normalize(src, status);
  if (U_FAILURE(status)) throw std::runtime_error("NFC normalization failed");
  return out;
}

bool is_space(UChar32 c) { return u_isUWhiteSpace(c) != 0; }

std::string to_utf8(const icu::UnicodeString& s) {
  std::string out;
  s.toUTF8String(out);
  return out;
}

}  // namespace

std::string normalize_text(std::string_view utf8) {
  const icu::UnicodeString src = to_nfc(utf8);
  icu::UnicodeString out;
  bool pending_space = false;
  for (int32_t i = 0; i < src.length();) {
    const UChar32 c = src.char32At(i);
    i += U16_LENGTH(c);
    if (is_space(c)) {
      pending_space = !out.isEmpty();
      continue;
    }
    if (pending_space) out.append(static_cast<UChar>(u' '));
    pending_space = false;
    out.append(c);
  }
  return to_utf8(out);
}

std::string first_paragraph(std::string_view utf8) {
  std::string para;
  bool have_text = false;
  std::size_t pos = 0;
  while (pos <= utf8.size()) {
    std::size_t nl = utf8.find('\n', pos);
    if (nl == std::string_view::npos) nl = utf8.size();
    const std::string_view line = utf8.substr(pos, nl - pos);
    if (normalize_text(line).empty()) {
      if (have_text) break;
    } else {
      para.append(line);
      para.push_back(' ');
      have_text = true;
    }
    if (nl == utf8.size()) break;
    pos = nl + 1;
  }
  return normalize_text(para);
}

std::vector<std::string> split_words(std::string_view utf8) {
  const icu::UnicodeString src = to_nfc(utf8);
  std::vector<std::string> words;
  icu::UnicodeString cur;
  for (int32_t i = 0; i < src.length();) {
    const UChar32 c = src.char32At(i);
    i += U16_LENGTH(c);
    if (is_space(c)) {
      if (!cur.isEmpty()) words.push_back(to_utf8(cur));
      cur.remove();
    } else {
      cur.append(c);
    }
  }
  if (!cur.isEmpty()) words.push_back(to_utf8(cur));
  return words;
}

std::size_t count_characters(std::string_view utf8) {
  const icu::UnicodeString src = to_nfc(utf8);
  std::size_t n = 0;
  for (int32_t i = 0; i < src.length();) {
    const UChar32 c = src.char32At(i);
    i += U16_LENGTH(c);
    if (!is_space(c)) ++n;
  }
  return n;
}

std::string take_characters(std::string_view utf8, std::size_t n) {
  const icu::UnicodeString src = icu::UnicodeString::fromUTF8(normalize_text(utf8));
  icu::UnicodeString out;
  std::size_t taken = 0;
  for (int32_t i = 0; i < src.length() && taken < n;) {
    const UChar32 c = src.char32At(i);
    i += U16_LENGTH(c);
    out.append(c);
    if (!is_space(c)) ++taken;
  }
  out.trim();
  return to_utf8(out);
}

std::string fold_case(std::string_view utf8) {
  icu::UnicodeString s = icu::UnicodeString::fromUTF8(normalize_text(utf8));
  s.foldCase(U_FOLD_CASE_DEFAULT);
  return normalize_text(to_utf8(s));
}

std::string join(const std::vector<std::string>& words, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i > 0) out.append(sep);
    out.append(words[i]);
  }
  return out;
}

}  // namespace shortdesc::corpus
