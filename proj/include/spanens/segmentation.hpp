#pragma once

/**
 * Word segmentation for span-level ensembling.
 *
 * A word is a maximal run of non-whitespace code points (UTF-8 input,
 * Unicode whitespace). Spans are cut at word boundaries: leading whitespace
 * belongs to the span, trailing whitespace belongs to whatever comes next.
 *
 * Two entry points produce identical results:
 * - truncate_to_words() for a complete string
 * - Segmenter for text arriving in arbitrary chunks from a decoder. The
 *   L-th word is only confirmed once a following whitespace character or an
 *   explicit end-of-sequence is seen.
 */

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace spanens {

struct WordSpan {
  std::string text;
  std::size_t word_count = 0;
  // last word is followed by whitespace or end-of-input
  bool complete = false;

  bool operator==(const WordSpan&) const = default;
};

/// True for the Unicode White_Space code points.
bool is_unicode_whitespace(char32_t cp);

std::size_t count_words(std::string_view text);

/// The words themselves, in order.
std::vector<std::string> split_words(std::string_view text);

/// Shortest prefix of `text` holding min(max_words, count_words(text)) whole
/// words, ending on the last character of the last included word.
WordSpan truncate_to_words(std::string_view text, std::size_t max_words);

enum class FeedStatus { need_more, reached };

class Segmenter {
 public:
  explicit Segmenter(std::size_t max_words);

  /// Append decoded text. Chunks may split UTF-8 sequences.
  FeedStatus feed(std::string_view chunk);

  /// Signal end-of-sequence; confirms a trailing word.
  FeedStatus finish();

  FeedStatus status() const { return reached_ ? FeedStatus::reached : FeedStatus::need_more; }
  bool at_eos() const { return eos_; }
  std::size_t confirmed_words() const { return confirmed_; }
  std::size_t max_words() const { return max_words_; }

  /// Current span: confirmed words only, no trailing whitespace.
  WordSpan span() const;

 private:
  void scan(bool at_end);

  std::size_t max_words_;
  std::string buffer_;
  std::size_t scan_pos_ = 0;
  std::size_t confirmed_ = 0;
  std::size_t span_end_ = 0;  // byte offset after the last confirmed word
  bool in_word_ = false;
  bool reached_ = false;
  bool eos_ = false;
};

}  // namespace spanens
