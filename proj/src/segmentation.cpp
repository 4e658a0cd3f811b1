#include "spanens/segmentation.hpp"

#include <stdexcept>

namespace spanens {

namespace {

struct Decoded {
  char32_t cp = 0;
  std::size_t len = 0;
  bool truncated = false;  // valid lead byte but sequence runs past the end
};

// Malformed bytes decode as U+FFFD with length 1, which is never whitespace.
Decoded decode_utf8(std::string_view s, std::size_t pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  if (b0 < 0x80) return {b0, 1, false};

  std::size_t len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return {0xFFFD, 1, false};
  }

  for (std::size_t k = 1; k < len; ++k) {
    if (pos + k >= s.size()) return {0xFFFD, s.size() - pos, true};
    const auto b = static_cast<unsigned char>(s[pos + k]);
    if ((b & 0xC0) != 0x80) return {0xFFFD, k, false};
    cp = (cp << 6) | (b & 0x3F);
  }
  return {cp, len, false};
}

}  // namespace

bool is_unicode_whitespace(char32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680:
    case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

std::size_t count_words(std::string_view text) {
  std::size_t words = 0;
  bool in_word = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const Decoded d = decode_utf8(text, pos);
    const bool ws = is_unicode_whitespace(d.cp);
    if (!ws && !in_word) ++words;
    in_word = !ws;
    pos += d.len;
  }
  return words;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t start = 0;
  bool in_word = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const Decoded d = decode_utf8(text, pos);
    const bool ws = is_unicode_whitespace(d.cp);
    if (!ws && !in_word) start = pos;
    if (ws && in_word) words.emplace_back(text.substr(start, pos - start));
    in_word = !ws;
    pos += d.len;
  }
  if (in_word) words.emplace_back(text.substr(start));
  return words;
}

WordSpan truncate_to_words(std::string_view text, std::size_t max_words) {
  if (max_words == 0) throw std::invalid_argument("truncate_to_words: max_words must be >= 1");

  WordSpan out;
  out.complete = true;
  std::size_t end = 0;
  bool in_word = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const Decoded d = decode_utf8(text, pos);
    if (is_unicode_whitespace(d.cp)) {
      in_word = false;
    } else {
      if (!in_word) {
        if (out.word_count == max_words) break;
        ++out.word_count;
      }
      in_word = true;
      end = pos + d.len;
    }
    pos += d.len;
  }
  out.text.assign(text.substr(0, end));
  return out;
}

Segmenter::Segmenter(std::size_t max_words) : max_words_(max_words) {
  if (max_words == 0) throw std::invalid_argument("Segmenter: max_words must be >= 1");
}

FeedStatus Segmenter::feed(std::string_view chunk) {
  if (reached_ || eos_) return status();
  buffer_.append(chunk);
  scan(false);
  return status();
}

FeedStatus Segmenter::finish() {
  if (!eos_ && !reached_) {
    eos_ = true;
    scan(true);
    if (in_word_) {
      ++confirmed_;
      span_end_ = buffer_.size();
      in_word_ = false;
      reached_ = confirmed_ == max_words_;
    }
  }
  eos_ = true;
  return status();
}

void Segmenter::scan(bool at_end) {
  while (scan_pos_ < buffer_.size() && !reached_) {
    const Decoded d = decode_utf8(buffer_, scan_pos_);
    if (d.truncated && !at_end) return;
    if (is_unicode_whitespace(d.cp)) {
      if (in_word_) {
        ++confirmed_;
        span_end_ = scan_pos_;
        in_word_ = false;
        if (confirmed_ == max_words_) {
          reached_ = true;
          return;
        }
      }
    } else {
      in_word_ = true;
    }
    scan_pos_ += d.len;
  }
}

WordSpan Segmenter::span() const {
  WordSpan out;
  out.word_count = confirmed_;
  out.text = buffer_.substr(0, span_end_);
  out.complete = reached_ || eos_;
  return out;
}

}  // namespace spanens
