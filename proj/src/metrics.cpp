#include "spanens/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <regex>
#include <stdexcept>

#include "spanens/segmentation.hpp"

namespace spanens {

namespace {

std::string ascii_lower(std::string_view text) {
  std::string out(text);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> bleu_tokens(std::string_view text) { return split_words(ascii_lower(text)); }

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts ngrams(const std::vector<std::string>& toks, std::size_t n) {
  NgramCounts counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    ++counts[std::vector<std::string>(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                      toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace

std::string normalize_answer(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (const auto& word : split_words(text)) {
    std::string cleaned;
    for (char c : word) {
      if (std::ispunct(static_cast<unsigned char>(c))) continue;
      cleaned += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    if (cleaned.empty()) continue;
    if (pending_space) out += ' ';
    out += cleaned;
    pending_space = true;
  }
  return out;
}

bool exact_match(std::string_view prediction, const std::vector<std::string>& references) {
  const std::string pred = normalize_answer(prediction);
  return std::any_of(references.begin(), references.end(),
                     [&](const std::string& ref) { return normalize_answer(ref) == pred; });
}

std::optional<double> extract_numeric_answer(std::string_view text) {
  static const std::regex number(R"([-+]?\d(?:[\d,]*\d)?(?:\.\d+)?)");
  const std::string s(text);
  std::optional<std::string> last;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), number); it != std::sregex_iterator(); ++it) {
    last = it->str();
  }
  if (!last) return std::nullopt;
  std::string digits;
  for (char c : *last) {
    if (c != ',') digits += c;
  }
  return std::strtod(digits.c_str(), nullptr);
}

bool numeric_match(std::string_view prediction, const std::vector<std::string>& references) {
  const auto pred = extract_numeric_answer(prediction);
  if (!pred) return false;
  for (const auto& ref : references) {
    const auto want = extract_numeric_answer(ref);
    if (want && std::abs(*pred - *want) <= 1e-9 * std::max(1.0, std::abs(*want))) return true;
  }
  return false;
}

double corpus_bleu(const std::vector<std::string>& hypotheses,
                   const std::vector<std::vector<std::string>>& reference_lists, std::size_t max_n) {
  if (hypotheses.size() != reference_lists.size()) {
    throw std::invalid_argument("corpus_bleu: hypotheses and references differ in length");
  }
  if (max_n == 0) throw std::invalid_argument("corpus_bleu: max_n must be positive");

  std::vector<std::size_t> matched(max_n, 0);
  std::vector<std::size_t> total(max_n, 0);
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;

  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    if (reference_lists[s].empty()) throw std::invalid_argument("corpus_bleu: empty reference list");
    const auto hyp = bleu_tokens(hypotheses[s]);
    std::vector<std::vector<std::string>> refs;
    for (const auto& r : reference_lists[s]) refs.push_back(bleu_tokens(r));

    hyp_len += hyp.size();
    std::size_t closest = refs.front().size();
    for (const auto& r : refs) {
      const auto d = [&](std::size_t len) { return len > hyp.size() ? len - hyp.size() : hyp.size() - len; };
      if (d(r.size()) < d(closest) || (d(r.size()) == d(closest) && r.size() < closest)) closest = r.size();
    }
    ref_len += closest;

    for (std::size_t n = 1; n <= max_n; ++n) {
      NgramCounts max_ref;
      for (const auto& r : refs) {
        for (const auto& [g, c] : ngrams(r, n)) max_ref[g] = std::max(max_ref[g], c);
      }
      for (const auto& [g, c] : ngrams(hyp, n)) {
        const auto it = max_ref.find(g);
        matched[n - 1] += std::min(c, it == max_ref.end() ? std::size_t{0} : it->second);
        total[n - 1] += c;
      }
    }
  }

  if (hyp_len == 0) return 0.0;
  double log_precision = 0.0;
  for (std::size_t n = 0; n < max_n; ++n) {
    if (matched[n] == 0) return 0.0;
    log_precision += std::log(static_cast<double>(matched[n]) / static_cast<double>(total[n]));
  }
  log_precision /= static_cast<double>(max_n);
  const double bp = hyp_len < ref_len
                        ? std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len))
                        : 1.0;
  return 100.0 * bp * std::exp(log_precision);
}

}  // namespace spanens
