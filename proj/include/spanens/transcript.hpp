#pragma once

#include <cstddef>
#include <ostream>

#include "json.hpp"
#include "spanens/ensemble.hpp"

namespace spanens {

/// One JSONL record per round. INVALID matrix cells and failed candidates
/// are null; wall-clock durations live under "timings_ms".
nlohmann::json round_to_json(const RoundResult& round, std::size_t round_index);

/// {"final_text", "stop_reason", "total_rounds"}
nlohmann::json transcript_summary_json(const Transcript& transcript);

/// Every round record followed by the summary line.
void write_transcript_jsonl(std::ostream& out, const Transcript& transcript);

}  // namespace spanens
