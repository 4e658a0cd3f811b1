#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "doctest.h"
#include "fakes.hpp"
#include "outlier_example.hpp"
#include "oracle.hpp"
#include "spanens/ensemble.hpp"
#include "spanens/synthetic.hpp"
#include "spanens/table_lm.hpp"

using namespace spanens;

namespace {

using Column = std::vector<std::pair<std::size_t, double>>;

std::vector<std::optional<SpanCandidate>> present(std::size_t n) {
  std::vector<std::optional<SpanCandidate>> out;
  for (std::size_t j = 0; j < n; ++j) out.push_back(SpanCandidate{j, " w", 1, false});
  return out;
}

std::vector<FilterResult> filters_for(const ScoreMatrix& m, double lambda, bool on) {
  std::vector<FilterResult> out;
  for (std::size_t j = 0; j < m.size(); ++j) {
    const auto col = m.column(j);
    if (col.empty()) {
      out.push_back({j, {}, {}, false});
    } else {
      out.push_back(on ? filter_scores(j, col, lambda) : keep_all(j, col));
    }
  }
  return out;
}

std::shared_ptr<fakes::ScriptedBackend> scripted(std::string id, std::string span,
                                                 std::map<std::string, double> ppl) {
  auto b = std::make_shared<fakes::ScriptedBackend>();
  b->id = std::move(id);
  b->span = std::move(span);
  b->ppl_by_text = std::move(ppl);
  return b;
}

}  // namespace

TEST_CASE("compute_perplexity") {
  CHECK(*compute_perplexity(std::vector<double>{0.0, 0.0, 0.0}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(*compute_perplexity(std::vector<double>{std::log(0.25), std::log(0.25)}) ==
        doctest::Approx(4.0).epsilon(1e-12));
  CHECK(std::abs(*compute_perplexity(std::vector<double>{std::log(0.5), std::log(0.25)}) - std::sqrt(8.0)) < 1e-9);
  CHECK_FALSE(compute_perplexity(std::vector<double>{}).has_value());
  CHECK_THROWS_AS(compute_perplexity(std::vector<double>{-1.0, -INFINITY}), ScoringError);
  CHECK_THROWS_AS(compute_perplexity(std::vector<double>{NAN}), ScoringError);
}

TEST_CASE("filter_scores") {
  SUBCASE("outlier pair removed") {
    const Column col{{0, 23.5}, {1, 0.88}, {2, 1.20}, {3, 1.10}};
    const auto r = filter_scores(5, col, 10.0);
    CHECK(r.span_index == 5);
    CHECK(r.triggered);
    CHECK(r.removed == std::vector<std::size_t>{0, 1});
    CHECK(r.kept == std::vector<std::size_t>{2, 3});
  }
  SUBCASE("equal scores never trigger") {
    const Column col{{0, 1.0}, {1, 1.0}, {2, 1.0}, {3, 1.0}};
    for (double lambda : {0.0, 0.5, 10.0}) {
      const auto r = filter_scores(0, col, lambda);
      CHECK_FALSE(r.triggered);
      CHECK(r.kept.size() == 4);
      CHECK(r.removed.empty());
    }
  }
  SUBCASE("ratio exactly lambda does not trigger") {
    const auto r = filter_scores(0, Column{{0, 10.0}, {1, 1.0}}, 10.0);
    CHECK_FALSE(r.triggered);
    CHECK(r.kept == std::vector<std::size_t>{0, 1});
    CHECK_FALSE(filter_scores(0, Column{{0, 20.0}, {1, 2.0}, {2, 5.0}}, 10.0).triggered);
  }
  SUBCASE("two scorers over the threshold keep both") {
    const auto r = filter_scores(0, Column{{0, 50.0}, {1, 1.0}}, 10.0);
    CHECK(r.triggered);
    CHECK(r.removed.empty());
    CHECK(r.kept == std::vector<std::size_t>{0, 1});
  }
  SUBCASE("ties resolve to the lowest scorer index") {
    const auto r = filter_scores(0, Column{{0, 1.0}, {1, 30.0}, {2, 1.0}, {3, 30.0}, {4, 2.0}}, 10.0);
    CHECK(r.removed == std::vector<std::size_t>{0, 1});
    CHECK(r.kept == std::vector<std::size_t>{2, 3, 4});
  }
  SUBCASE("single score") {
    const auto r = filter_scores(0, Column{{3, 7.0}}, 0.0);
    CHECK_FALSE(r.triggered);
    CHECK(r.kept == std::vector<std::size_t>{3});
  }
  SUBCASE("lambda zero removes max and min of unequal scores") {
    const auto r = filter_scores(0, Column{{0, 1.0}, {1, 1.01}, {2, 1.02}}, 0.0);
    CHECK(r.triggered);
    CHECK(r.removed == std::vector<std::size_t>{0, 2});
  }
  CHECK_THROWS_AS(filter_scores(0, Column{}, 10.0), UnscorableSpanError);
}

TEST_CASE("select_span") {
  ScoreMatrix m(2);
  SUBCASE("smaller mean wins") {
    m.set(0, 0, 0.9);
    m.set(1, 0, 0.9);
    m.set(0, 1, 5.0);
    m.set(1, 1, 5.0);
    const auto s = select_span(m, filters_for(m, 10, true), present(2));
    CHECK(s.winner_index == 0);
    CHECK(s.mean_ppl == doctest::Approx(0.9));
  }
  SUBCASE("ties go to the lowest producer index") {
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) m.set(i, j, 2.0);
    CHECK(select_span(m, filters_for(m, 10, true), present(2)).winner_index == 0);
  }
  SUBCASE("absent and unscored spans are ineligible") {
    m.set(0, 1, 3.0);
    auto cands = present(2);
    CHECK(select_span(m, filters_for(m, 10, true), cands).winner_index == 1);
    cands[1].reset();
    CHECK_THROWS_AS(select_span(m, filters_for(m, 10, true), cands), NoEligibleSpanError);
  }
}

TEST_CASE("outlier example matrix: filtering rescues the correct span") {
  // span 0 is model 0's wrong answer; spans 1-3 are the correct answer
  ScoreMatrix m(4);
  const double wrong[4] = {0.88, 3.0, 2.8, 3.2};
  const double gold[4] = {23.5, 0.88, 1.20, 1.10};
  for (std::size_t i = 0; i < 4; ++i) {
    m.set(i, 0, wrong[i]);
    for (std::size_t j = 1; j < 4; ++j) m.set(i, j, gold[i]);
  }
  const auto filtered = filters_for(m, 10, true);
  CHECK(filtered[1].triggered);
  CHECK(filtered[1].removed == std::vector<std::size_t>{0, 1});
  CHECK_FALSE(filtered[0].triggered);
  // kept means by hand: gold (1.20 + 1.10) / 2 = 1.15, wrong 9.88 / 4 = 2.47
  const auto on = select_span(m, filtered, present(4));
  CHECK(on.winner_index == 1);
  CHECK(on.mean_ppl == doctest::Approx(1.15));
  // unfiltered gold mean 26.68 / 4 = 6.67 loses to 2.47
  const auto off = select_span(m, filters_for(m, 10, false), present(4));
  CHECK(off.winner_index == 0);
  CHECK(off.mean_ppl == doctest::Approx(2.47));
}

TEST_CASE("ensemble_round on outlier example table-LMs") {
  const auto pool = outlier_example::pool();
  const auto specs = outlier_example::specs();
  EnsembleConfig cfg;
  cfg.span_length_words = 3;

  const RoundResult r = ensemble_round(pool, outlier_example::kPrompt, cfg);
  REQUIRE(r.candidates[0]);
  CHECK(r.candidates[0]->text == outlier_example::kWrong);
  for (std::size_t j = 1; j < 4; ++j) CHECK(r.candidates[j]->text == outlier_example::kGold);

  // the matrix recomputed straight from the probability tables
  oracle::Grid grid(4, std::vector<std::optional<double>>(4));
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      const std::string second = j == 0 ? " Robert" : " Bobby";
      const std::string third = j == 0 ? " Williams" : " Scott";
      grid[i][j] = oracle::perplexity_of(oracle::chain_probs(specs[i], " A:", {" by", second, third}));
      CHECK(std::abs(*r.matrix.at(i, j) - *grid[i][j]) < 1e-9);
    }
  }
  CHECK(*r.matrix.at(0, 1) == doctest::Approx(23.5).epsilon(1e-3));

  const std::vector<bool> eligible(4, true);
  CHECK(r.winner_index == oracle::select(grid, eligible, 10, true));
  CHECK(*r.winner_index == 1);
  CHECK(r.filters[1].removed == std::vector<std::size_t>{0, 3});

  cfg.filter_enabled = false;
  const RoundResult off = ensemble_round(pool, outlier_example::kPrompt, cfg);
  CHECK(*off.winner_index == 0);
  CHECK(off.winner_index == oracle::select(grid, eligible, 10, false));
  for (const auto& f : off.filters) CHECK(f.removed.empty());
}

TEST_CASE("ensemble_round failure handling") {
  EnsembleConfig cfg;
  cfg.span_length_words = 1;
  const std::map<std::string, double> scores{{" a", 2.0}, {" b", 3.0}};

  SUBCASE("failed generation leaves an absent candidate") {
    auto a = scripted("a", " a", scores);
    auto b = scripted("b", " b", scores);
    a->fail_generate = true;
    const auto r = ensemble_round(EnsemblePool({a, b}), "p", cfg);
    CHECK_FALSE(r.candidates[0]);
    CHECK(r.matrix.column(0).empty());
    // the failed model still scores the surviving span
    CHECK(r.matrix.valid(0, 1));
    CHECK(*r.winner_index == 1);
  }
  SUBCASE("failed scoring invalidates single entries") {
    auto a = scripted("a", " a", scores);
    auto b = scripted("b", " b", scores);
    b->fail_score = true;
    const auto r = ensemble_round(EnsemblePool({a, b}), "p", cfg);
    CHECK(r.matrix.valid(0, 0));
    CHECK_FALSE(r.matrix.valid(1, 0));
    CHECK_FALSE(r.matrix.valid(1, 1));
    CHECK(*r.winner_index == 0);
  }
  SUBCASE("every generation failing is a round error") {
    auto a = scripted("a", " a", scores);
    a->fail_generate = true;
    CHECK_THROWS_AS(ensemble_round(EnsemblePool({a}), "p", cfg), RoundError);
    cfg.max_retries = 2;
    CHECK_THROWS_AS(generate(EnsemblePool({a}), "p", cfg), RoundError);
    CHECK(a->generate_calls == 4);
  }
  SUBCASE("an empty span is ineligible but its model still scores") {
    auto a = scripted("a", "", scores);
    auto b = scripted("b", " b", scores);
    const auto r = ensemble_round(EnsemblePool({a, b}), "p", cfg);
    CHECK(r.candidates[0]->word_count == 0);
    CHECK(r.candidates[0]->finished);
    CHECK(r.matrix.valid(0, 1));
    CHECK(*r.winner_index == 1);
  }
  SUBCASE("no non-empty span scorable is a round error") {
    auto a = scripted("a", " a", scores);
    a->fail_score = true;
    CHECK_THROWS_AS(ensemble_round(EnsemblePool({a, a}), "p", cfg), RoundError);
  }
  SUBCASE("all spans empty") {
    auto a = scripted("a", "", scores);
    const auto t = generate(EnsemblePool({a, a}), "p", cfg);
    CHECK(t.stop_reason == StopReason::all_empty);
    CHECK(t.rounds.size() == 1);
    CHECK(t.final_text.empty());
  }
  SUBCASE("issues N generations and N x N scorings") {
    auto a = scripted("a", " a", scores);
    auto b = scripted("b", " b", scores);
    auto c = scripted("c", " a", scores);
    ensemble_round(EnsemblePool({a, b, c}), "p", cfg);
    CHECK(a->generate_calls == 1);
    CHECK(a->score_calls + b->score_calls + c->score_calls == 9);
  }
}

TEST_CASE("generate") {
  SUBCASE("identical candidates: index 0 wins and output equals the single model") {
    const auto chain = synthetic::chain_model("c", "Q:", 6);
    const EnsemblePool pair({std::make_shared<TableLM>(chain), std::make_shared<TableLM>(chain)});
    const EnsemblePool single({std::make_shared<TableLM>(chain)});
    EnsembleConfig cfg;
    cfg.span_length_words = 4;
    const auto t2 = generate(pair, "Q:", cfg);
    const auto t1 = generate(single, "Q:", cfg);
    CHECK(t2.final_text == " w1 w2 w3 w4 w5 w6");
    CHECK(t1.final_text == t2.final_text);
    for (const auto& r : t2.rounds) CHECK(*r.winner_index == 0);
  }
  SUBCASE("8-word chain with L=4 takes exactly two rounds") {
    const EnsemblePool pool({std::make_shared<TableLM>(synthetic::chain_model("c", "Q:", 8))});
    EnsembleConfig cfg;
    cfg.span_length_words = 4;
    const auto t = generate(pool, "Q:", cfg);
    CHECK(t.rounds.size() == 2);
    CHECK(t.stop_reason == StopReason::eos);
    CHECK_FALSE(t.rounds[0].candidates[0]->finished);
    CHECK(t.rounds[1].candidates[0]->finished);
  }
  SUBCASE("word budget checked at round start") {
    const EnsemblePool pool({std::make_shared<TableLM>(synthetic::chain_model("c", "Q:", 30))});
    EnsembleConfig cfg;
    cfg.span_length_words = 4;
    cfg.max_total_words = 5;
    const auto t = generate(pool, "Q:", cfg);
    CHECK(t.rounds.size() == 2);
    CHECK(t.stop_reason == StopReason::word_budget);
    CHECK(count_words(t.final_text) == 8);
  }
  SUBCASE("single-model pool is greedy decoding truncated by the budget") {
    const auto chain = synthetic::chain_model("c", "Q:", 30);
    const EnsemblePool pool({std::make_shared<TableLM>(chain)});
    EnsembleConfig cfg;
    cfg.span_length_words = 1;
    cfg.max_total_words = 7;
    const auto t = generate(pool, "Q:", cfg);
    CHECK(t.final_text == " w1 w2 w3 w4 w5 w6 w7");
    CHECK(TableLM(chain).generate_span("Q:", 7).text == t.final_text);
  }
  SUBCASE("invalid config") {
    EnsembleConfig cfg;
    cfg.span_length_words = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.span_length_words = 8;
    cfg.max_total_words = 4;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.max_total_words = 8;
    cfg.lambda = -1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
}

TEST_CASE("property: selection agrees with the brute-force oracle, and is scale invariant") {
  std::mt19937_64 rng(7);
  auto u01 = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  for (int iter = 0; iter < 400; ++iter) {
    const std::size_t n = std::vector<std::size_t>{2, 3, 4, 6}[rng() % 4];
    const double lambda = std::vector<double>{0.0, 2.0, 10.0}[rng() % 3];
    ScoreMatrix m(n);
    oracle::Grid grid(n, std::vector<std::optional<double>>(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (u01() < 0.1) continue;
        const double v = std::exp(std::log(0.5) + u01() * (std::log(50.0) - std::log(0.5)));
        m.set(i, j, v);
        grid[i][j] = v;
      }
    }
    const auto cands = present(n);
    const std::vector<bool> eligible(n, true);
    for (bool on : {true, false}) {
      const auto filters = filters_for(m, lambda, on);
      const auto want = oracle::select(grid, eligible, lambda, on);
      if (!want) {
        CHECK_THROWS_AS(select_span(m, filters, cands), NoEligibleSpanError);
        continue;
      }
      const auto got = select_span(m, filters, cands);
      CHECK(got.winner_index == *want);

      ScoreMatrix scaled(n);
      const double c = 0.01 + 100.0 * u01();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (grid[i][j]) scaled.set(i, j, *grid[i][j] * c);
      const auto scaled_filters = filters_for(scaled, lambda, on);
      for (std::size_t j = 0; j < n; ++j) {
        CHECK(scaled_filters[j].kept == filters[j].kept);
        CHECK(scaled_filters[j].triggered == filters[j].triggered);
      }
      CHECK(select_span(scaled, scaled_filters, cands).winner_index == got.winner_index);
    }
  }
}

TEST_CASE("property: filter safety and idempotence") {
  std::mt19937_64 rng(11);
  auto u01 = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  for (int iter = 0; iter < 500; ++iter) {
    const std::size_t n = 1 + rng() % 7;
    Column col;
    for (std::size_t i = 0; i < n; ++i) col.emplace_back(i, 0.5 + 60.0 * u01());
    const double lambda = 20.0 * u01();
    const auto r = filter_scores(0, col, lambda);
    CHECK_FALSE(r.kept.empty());
    CHECK(r.kept.size() + r.removed.size() == n);
    if (n >= 3 && r.triggered) CHECK(r.removed.size() == 2);
    if (!r.triggered) CHECK(r.removed.empty());

    Column kept_col;
    for (auto i : r.kept) kept_col.emplace_back(i, col[i].second);
    double lo = kept_col.front().second, hi = lo;
    for (const auto& [i, v] : kept_col) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi / lo <= lambda) CHECK(filter_scores(0, kept_col, lambda).removed.empty());
  }
}

TEST_CASE("property: determinism regardless of worker count") {
  const auto suite = synthetic::robustness_suite(12, 3);
  const auto pool = suite.make_pool("2-good-2-bad");
  EnsembleConfig cfg;
  cfg.span_length_words = 1;
  for (const auto& ex : suite.dataset) {
    cfg.workers = 1;
    const auto a = generate(pool, ex.prompt, cfg);
    cfg.workers = 16;
    const auto b = generate(pool, ex.prompt, cfg);
    CHECK(a.final_text == b.final_text);
    REQUIRE(a.rounds.size() == b.rounds.size());
    for (std::size_t k = 0; k < a.rounds.size(); ++k) {
      CHECK(a.rounds[k].matrix == b.rounds[k].matrix);
      CHECK(a.rounds[k].filters == b.rounds[k].filters);
      CHECK(a.rounds[k].winner_index == b.rounds[k].winner_index);
    }
  }
}
