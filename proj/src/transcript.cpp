#include "spanens/transcript.hpp"

namespace spanens {

nlohmann::json round_to_json(const RoundResult& round, std::size_t round_index) {
  using nlohmann::json;

  json candidates = json::array();
  for (const auto& c : round.candidates) {
    if (!c) {
      candidates.push_back(nullptr);
      continue;
    }
    candidates.push_back({{"producer", c->producer_index},
                          {"text", c->text},
                          {"word_count", c->word_count},
                          {"finished", c->finished}});
  }

  json matrix = json::array();
  for (std::size_t i = 0; i < round.matrix.size(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < round.matrix.size(); ++j) {
      const auto& v = round.matrix.at(i, j);
      row.push_back(v ? json(*v) : json(nullptr));
    }
    matrix.push_back(std::move(row));
  }

  json filters = json::array();
  for (const auto& f : round.filters) {
    filters.push_back({{"span", f.span_index},
                       {"removed", f.removed},
                       {"kept", f.kept},
                       {"triggered", f.triggered}});
  }

  return {{"round", round_index},
          {"candidates", std::move(candidates)},
          {"matrix", std::move(matrix)},
          {"filters", std::move(filters)},
          {"winner", round.winner_index ? json(*round.winner_index) : json(nullptr)},
          {"winner_mean_ppl", round.winner_mean_ppl ? json(*round.winner_mean_ppl) : json(nullptr)},
          {"timings_ms",
           {{"generate", round.timings.generate_ms},
            {"score", round.timings.score_ms},
            {"select", round.timings.select_ms}}}};
}

nlohmann::json transcript_summary_json(const Transcript& transcript) {
  return {{"final_text", transcript.final_text},
          {"stop_reason", to_string(transcript.stop_reason)},
          {"total_rounds", transcript.rounds.size()}};
}

void write_transcript_jsonl(std::ostream& out, const Transcript& transcript) {
  for (std::size_t i = 0; i < transcript.rounds.size(); ++i) {
    out << round_to_json(transcript.rounds[i], i).dump() << '\n';
  }
  out << transcript_summary_json(transcript).dump() << '\n';
}

}  // namespace spanens
