#include "spanens/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

namespace spanens::synthetic {

namespace {

constexpr std::size_t kAnswers = 8;
const std::string kEos = "</s>";

std::string answer_token(std::size_t k) { return " a" + std::to_string(k); }
std::string prompt_token(std::size_t i) { return "Q" + std::to_string(i) + ":"; }

// Portable draws: std::*_distribution output is implementation-defined.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }
double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::exp(uniform(rng, std::log(lo), std::log(hi)));
}
std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }
std::size_t pick_other(std::mt19937_64& rng, std::size_t n, std::size_t avoid) {
  const std::size_t k = pick(rng, n - 1);
  return k >= avoid ? k + 1 : k;
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t slot) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(slot)};
  return std::mt19937_64(seq);
}

// Assigned answer probabilities, remaining mass spread evenly over the rest.
std::map<std::string, double> answer_distribution(const std::map<std::size_t, double>& assigned) {
  double used = 0.0;
  for (const auto& [k, p] : assigned) used += p;
  const double rest = (1.0 - used) / static_cast<double>(kAnswers - assigned.size());
  std::map<std::string, double> dist;
  for (std::size_t k = 0; k < kAnswers; ++k) {
    const auto it = assigned.find(k);
    dist[answer_token(k)] = it == assigned.end() ? rest : it->second;
  }
  return dist;
}

TableSpec base_spec(std::string name, std::size_t n_examples) {
  TableSpec spec;
  spec.name = std::move(name);
  spec.order = 1;
  spec.eos = kEos;
  spec.vocab.push_back(kEos);
  for (std::size_t k = 0; k < kAnswers; ++k) {
    spec.vocab.push_back(answer_token(k));
    spec.transitions[answer_token(k)] = {{kEos, 1.0}};
  }
  for (std::size_t i = 0; i < n_examples; ++i) spec.vocab.push_back(prompt_token(i));
  return spec;
}

std::vector<std::size_t> gold_answers(std::size_t n_examples, std::uint64_t seed) {
  auto rng = stream(seed, 0xA11);
  std::vector<std::size_t> gold(n_examples);
  for (auto& g : gold) g = pick(rng, kAnswers);
  return gold;
}

std::vector<EvalExample> make_dataset(const std::vector<std::size_t>& gold) {
  std::vector<EvalExample> out;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "ex%04zu", i);
    out.push_back({id, prompt_token(i), {"a" + std::to_string(gold[i])}, "exact_match"});
  }
  return out;
}

TableSpec good_model(const std::string& name, const std::vector<std::size_t>& gold, std::mt19937_64 rng) {
  TableSpec spec = base_spec(name, gold.size());
  for (std::size_t i = 0; i < gold.size(); ++i) {
    std::map<std::size_t, double> assigned;
    const double top = uniform(rng, 0.5, 0.7);
    if (uniform01(rng) < 0.1) {
      // occasionally confused: a wrong word on top, gold runner-up
      assigned[pick_other(rng, kAnswers, gold[i])] = top;
      assigned[gold[i]] = uniform(rng, 0.1, 0.9) * (1.0 - top);
    } else {
      assigned[gold[i]] = top;
    }
    spec.transitions[prompt_token(i)] = answer_distribution(assigned);
  }
  return spec;
}

TableSpec bad_model(const std::string& name, const std::vector<std::size_t>& gold, std::mt19937_64 rng) {
  TableSpec spec = base_spec(name, gold.size());
  for (std::size_t i = 0; i < gold.size(); ++i) {
    std::map<std::size_t, double> assigned;
    const std::size_t wrong = pick_other(rng, kAnswers, gold[i]);
    assigned[wrong] = uniform(rng, 0.55, 0.8);
    assigned[gold[i]] = std::min(log_uniform(rng, 0.025, 0.05), (1.0 - assigned[wrong]) * 0.9);
    spec.transitions[prompt_token(i)] = answer_distribution(assigned);
  }
  return spec;
}

}  // namespace

EnsemblePool Suite::make_pool(const std::vector<std::string>& members) const {
  std::vector<std::shared_ptr<const Backend>> backends;
  for (const auto& m : members) backends.push_back(std::make_shared<TableLM>(models.at(m)));
  return EnsemblePool(std::move(backends));
}

EnsemblePool Suite::make_pool(const std::string& scenario) const {
  for (const auto& [name, members] : pools) {
    if (name == scenario) return make_pool(members);
  }
  throw PoolConfigError("unknown synthetic pool scenario '" + scenario + "'");
}

Suite robustness_suite(std::size_t n_examples, std::uint64_t seed) {
  const auto gold = gold_answers(n_examples, seed);
  Suite suite;
  suite.dataset = make_dataset(gold);
  for (std::size_t m = 0; m < 4; ++m) {
    const std::string name = "g" + std::to_string(m);
    suite.models.emplace(name, good_model(name, gold, stream(seed, 0x100 + m)));
  }
  for (std::size_t m = 0; m < 2; ++m) {
    const std::string name = "b" + std::to_string(m);
    suite.models.emplace(name, bad_model(name, gold, stream(seed, 0x200 + m)));
  }
  suite.pools = {{"4-good", {"g0", "g1", "g2", "g3"}},
                 {"3-good-1-bad", {"g0", "g1", "g2", "b0"}},
                 {"2-good-2-bad", {"g0", "g1", "b0", "b1"}}};
  return suite;
}

Suite complementary_suite(std::size_t n_examples, std::uint64_t seed) {
  const auto gold = gold_answers(n_examples, seed);
  Suite suite;
  suite.dataset = make_dataset(gold);
  std::vector<std::string> all;
  for (std::size_t m = 0; m < 4; ++m) {
    const std::string name = "m" + std::to_string(m);
    auto rng = stream(seed, 0x300 + m);
    TableSpec spec = base_spec(name, n_examples);
    for (std::size_t i = 0; i < n_examples; ++i) {
      const bool knows = (i % 10 + 10 - m) % 10 < 4;
      std::map<std::size_t, double> assigned;
      if (knows) {
        assigned[gold[i]] = 0.9;
      } else {
        assigned[pick_other(rng, kAnswers, gold[i])] = 0.16;
        assigned[gold[i]] = 0.14;
      }
      spec.transitions[prompt_token(i)] = answer_distribution(assigned);
    }
    suite.models.emplace(name, std::move(spec));
    suite.pools.push_back({name, {name}});
    all.push_back(name);
  }
  suite.pools.insert(suite.pools.begin(), {"4-complementary", all});
  return suite;
}

TableSpec chain_model(std::string name, const std::string& prompt, std::size_t n_words) {
  TableSpec spec;
  spec.name = std::move(name);
  spec.order = 1;
  spec.eos = kEos;
  spec.vocab = {kEos, prompt};
  std::string prev = prompt;
  for (std::size_t w = 1; w <= n_words; ++w) {
    const std::string tok = " w" + std::to_string(w);
    spec.vocab.push_back(tok);
    spec.transitions[prev] = {{tok, 1.0}};
    prev = tok;
  }
  spec.transitions[prev] = {{kEos, 1.0}};
  return spec;
}

void write_suite(const Suite& suite, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "models");
  std::filesystem::create_directories(dir / "pools");
  for (const auto& [name, spec] : suite.models) {
    std::ofstream out(dir / "models" / (name + ".json"));
    out << TableLM(spec).to_json().dump(1) << '\n';
  }
  for (const auto& [scenario, members] : suite.pools) {
    nlohmann::json pool = nlohmann::json::array();
    for (const auto& m : members) {
      pool.push_back({{"type", "table"}, {"name", m}, {"path", "../models/" + m + ".json"}});
    }
    std::ofstream out(dir / "pools" / (scenario + ".json"));
    out << pool.dump(2) << '\n';
  }
  write_dataset(dir / "dataset.jsonl", suite.dataset);
}

}  // namespace spanens::synthetic
