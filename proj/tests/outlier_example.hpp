#pragma once

// Four table-LMs answering "who wrote it?": model 0 is confidently wrong
// (" by Robert Williams") and scores the correct span harshly; models 1-3
// produce the correct span " by Bobby Scott".

#include <memory>
#include <string>
#include <vector>

#include "spanens/pool.hpp"
#include "spanens/table_lm.hpp"

namespace outlier_example {

inline const std::string kPrompt = "Song? A:";
inline const std::string kGold = " by Bobby Scott";
inline const std::string kWrong = " by Robert Williams";

inline spanens::TableSpec model(std::string name, double p_bobby, double p_scott, double p_williams) {
  spanens::TableSpec s;
  s.name = std::move(name);
  s.order = 1;
  s.eos = "</s>";
  s.vocab = {"</s>", "Song?", " A:", " by", " Bobby", " Scott", " Robert", " Williams"};
  s.transitions = {
      {" A:", {{" by", 1.0}}},
      {" by", {{" Bobby", p_bobby}, {" Robert", 1.0 - p_bobby}}},
      {" Bobby", {{" Scott", p_scott}, {" Williams", 1.0 - p_scott}}},
      {" Robert", {{" Williams", p_williams}, {" Scott", 1.0 - p_williams}}},
      {" Scott", {{"</s>", 1.0}}},
      {" Williams", {{"</s>", 1.0}}},
  };
  return s;
}

inline std::vector<spanens::TableSpec> specs() {
  return {model("llm1-wrong", 0.02, 0.00385, 0.99),
          model("llm2", 0.70, 0.90, 0.90),
          model("llm3", 0.75, 0.85, 0.90),
          model("llm4", 0.80, 0.80, 0.88)};
}

inline spanens::EnsemblePool pool() {
  std::vector<std::shared_ptr<const spanens::Backend>> models;
  for (auto& s : specs()) models.push_back(std::make_shared<spanens::TableLM>(s));
  return spanens::EnsemblePool(std::move(models));
}

}  // namespace outlier_example
