#include "spanens/table_lm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "spanens/segmentation.hpp"

namespace spanens {

namespace {

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead & 0xE0) == 0xC0) return 2;
  if ((lead & 0xF0) == 0xE0) return 3;
  if ((lead & 0xF8) == 0xF0) return 4;
  return 1;
}

}  // namespace

std::string context_key(const std::vector<std::string>& tokens) {
  std::string key;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) key += kContextSeparator;
    key += tokens[i];
  }
  return key;
}

TableLM::TableLM(TableSpec spec) : spec_(std::move(spec)) {
  if (spec_.vocab.empty()) throw TableLMError(spec_.name + ": empty vocabulary");
  for (std::size_t i = 0; i < spec_.vocab.size(); ++i) {
    const auto& tok = spec_.vocab[i];
    if (tok.empty()) throw TableLMError(spec_.name + ": empty token in vocabulary");
    if (!index_.emplace(tok, i).second) throw TableLMError(spec_.name + ": duplicate token '" + tok + "'");
    if (tok != spec_.eos) max_token_bytes_ = std::max(max_token_bytes_, tok.size());
  }
  const auto eos = index_.find(spec_.eos);
  if (eos == index_.end()) throw TableLMError(spec_.name + ": eos token not in vocabulary");
  eos_index_ = eos->second;
  if (spec_.max_tokens_per_span == 0) throw TableLMError(spec_.name + ": max_tokens_per_span must be positive");

  for (const auto& [ctx, probs] : spec_.transitions) {
    if (probs.empty()) throw TableLMError(spec_.name + ": empty distribution for context '" + ctx + "'");
    Distribution dist;
    double total = 0.0;
    for (const auto& [tok, p] : probs) {
      const auto it = index_.find(tok);
      if (it == index_.end()) throw TableLMError(spec_.name + ": unknown token '" + tok + "'");
      if (!(p > 0.0) || p > 1.0) throw TableLMError(spec_.name + ": probability out of (0, 1] for '" + tok + "'");
      dist.push_back({it->second, p});
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw TableLMError(spec_.name + ": distribution for context '" + ctx + "' sums to " + std::to_string(total));
    }
    std::sort(dist.begin(), dist.end(), [](const Entry& a, const Entry& b) { return a.token < b.token; });
    table_.emplace(ctx, std::move(dist));
  }
}

TableLM TableLM::from_json(const nlohmann::json& j, std::string name) {
  try {
    TableSpec spec;
    spec.name = j.value("name", std::move(name));
    spec.order = j.at("order").get<std::size_t>();
    spec.vocab = j.at("vocab").get<std::vector<std::string>>();
    spec.eos = j.at("eos").get<std::string>();
    if (j.contains("transitions")) {
      spec.transitions = j.at("transitions").get<std::map<std::string, std::map<std::string, double>>>();
    }
    const auto fallback = j.value("fallback", std::string("uniform"));
    if (fallback != "uniform") throw TableLMError("unsupported fallback '" + fallback + "'");
    spec.max_tokens_per_span = j.value("max_tokens_per_span", spec.max_tokens_per_span);
    return TableLM(std::move(spec));
  } catch (const nlohmann::json::exception& e) {
    throw TableLMError("malformed table-LM: " + std::string(e.what()));
  }
}

TableLM TableLM::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TableLMError("cannot open table-LM file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw TableLMError(path.string() + ": " + e.what());
  }
  return from_json(j, path.stem().string());
}

nlohmann::json TableLM::to_json() const {
  return {{"name", spec_.name},
          {"order", spec_.order},
          {"vocab", spec_.vocab},
          {"eos", spec_.eos},
          {"transitions", spec_.transitions},
          {"fallback", "uniform"}};
}

std::vector<std::string> TableLM::tokenize(std::string_view text, bool strict) const {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t take = 0;
    for (std::size_t len = std::min(max_token_bytes_, text.size() - pos); len > 0; --len) {
      const auto it = index_.find(std::string(text.substr(pos, len)));
      if (it != index_.end() && it->second != eos_index_) {
        take = len;
        break;
      }
    }
    if (take == 0) {
      take = std::min(utf8_length(static_cast<unsigned char>(text[pos])), text.size() - pos);
      if (strict) {
        throw BackendError(spec_.name + ": text not covered by vocabulary at '" +
                           std::string(text.substr(pos, take)) + "'");
      }
    }
    out.emplace_back(text.substr(pos, take));
    pos += take;
  }
  return out;
}

const TableLM::Distribution* TableLM::lookup(const std::vector<std::string>& history) const {
  const std::size_t k = std::min(spec_.order, history.size());
  const std::vector<std::string> ctx(history.end() - static_cast<std::ptrdiff_t>(k), history.end());
  const auto it = table_.find(context_key(ctx));
  return it == table_.end() ? nullptr : &it->second;
}

std::size_t TableLM::greedy_next(const std::vector<std::string>& history) const {
  const Distribution* dist = lookup(history);
  if (!dist) return 0;  // uniform fallback
  const Entry* best = &dist->front();
  for (const Entry& e : *dist) {
    if (e.prob > best->prob) best = &e;
  }
  return best->token;
}

double TableLM::prob_of(const std::vector<std::string>& history, std::size_t token) const {
  const Distribution* dist = lookup(history);
  if (!dist) return 1.0 / static_cast<double>(spec_.vocab.size());
  const auto it = std::lower_bound(dist->begin(), dist->end(), token,
                                   [](const Entry& e, std::size_t t) { return e.token < t; });
  return (it != dist->end() && it->token == token) ? it->prob : 0.0;
}

double TableLM::probability(const std::vector<std::string>& history, const std::string& token) const {
  const auto it = index_.find(token);
  return it == index_.end() ? 0.0 : prob_of(history, it->second);
}

SpanCandidate TableLM::generate_span(std::string_view prefix, std::size_t span_words) const {
  std::vector<std::string> history = tokenize(prefix);
  Segmenter seg(span_words);
  bool finished = true;
  for (std::size_t step = 0; step < spec_.max_tokens_per_span; ++step) {
    const std::size_t next = greedy_next(history);
    if (next == eos_index_) break;
    history.push_back(spec_.vocab[next]);
    if (seg.feed(spec_.vocab[next]) == FeedStatus::reached) {
      finished = false;
      break;
    }
  }
  if (finished) seg.finish();

  const WordSpan span = seg.span();
  SpanCandidate c;
  c.text = span.text;
  c.word_count = span.word_count;
  c.finished = finished;
  return c;
}

std::vector<TokenScore> TableLM::score(std::string_view prefix, std::string_view continuation) const {
  if (continuation.empty()) throw BackendError(spec_.name + ": empty continuation");
  std::vector<std::string> history = tokenize(prefix);
  std::vector<TokenScore> out;
  for (auto& tok : tokenize(continuation, true)) {
    const double p = prob_of(history, index_.at(tok));
    if (!(p > 0.0)) throw BackendError(spec_.name + ": zero probability for token '" + tok + "'");
    out.push_back({tok, std::log(p)});
    history.push_back(std::move(tok));
  }
  return out;
}

}  // namespace spanens
