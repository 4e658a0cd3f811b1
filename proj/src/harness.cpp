#include "spanens/harness.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

#include "spanens/metrics.hpp"
#include "spanens/parallel.hpp"
#include "spanens/segmentation.hpp"

namespace spanens {

std::optional<Metric> parse_metric(std::string_view name) {
  if (name == "em") return Metric::em;
  if (name == "numeric") return Metric::numeric;
  if (name == "bleu") return Metric::bleu;
  return std::nullopt;
}

const char* to_string(Metric metric) {
  switch (metric) {
    case Metric::em: return "em";
    case Metric::numeric: return "numeric";
    case Metric::bleu: return "bleu";
  }
  return "unknown";
}

std::vector<EvalExample> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open dataset " + path.string());

  std::vector<EvalExample> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    try {
      const auto j = nlohmann::json::parse(line);
      EvalExample ex;
      ex.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
      ex.prompt = j.at("prompt").get<std::string>();
      ex.references = j.at("references").get<std::vector<std::string>>();
      ex.task_kind = j.value("task_kind", std::string("exact_match"));
      if (ex.references.empty()) throw DatasetError(where + ": references must be non-empty");
      if (ex.task_kind != "exact_match" && ex.task_kind != "numeric" && ex.task_kind != "translation") {
        throw DatasetError(where + ": unknown task_kind '" + ex.task_kind + "'");
      }
      if (ex.task_kind == "numeric") {
        for (const auto& r : ex.references) {
          if (!extract_numeric_answer(r)) throw DatasetError(where + ": non-numeric reference '" + r + "'");
        }
      }
      out.push_back(std::move(ex));
    } catch (const nlohmann::json::exception& e) {
      throw DatasetError(where + ": " + e.what());
    }
  }
  return out;
}

void write_dataset(const std::filesystem::path& path, const std::vector<EvalExample>& examples) {
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write dataset " + path.string());
  for (const auto& ex : examples) {
    out << nlohmann::json{{"id", ex.id}, {"prompt", ex.prompt}, {"references", ex.references},
                          {"task_kind", ex.task_kind}}
               .dump()
        << '\n';
  }
}

nlohmann::json EvalReport::to_json(bool with_timing) const {
  using nlohmann::json;
  json examples_json = json::array();
  for (const auto& r : examples) {
    json e = {{"id", r.id},
              {"prediction", r.prediction},
              {"score", r.score},
              {"failed", r.failed},
              {"stop_reason", r.stop_reason},
              {"rounds", r.rounds},
              {"words", r.words}};
    if (r.failed) e["error"] = r.error;
    if (with_timing) e["timing_ms"] = {{"generate", r.generate_ms}, {"extra", r.extra_ms}};
    examples_json.push_back(std::move(e));
  }
  json j = {{"config",
             {{"span_length", config.span_length_words},
              {"lambda", config.lambda},
              {"filter", config.filter_enabled},
              {"max_total_words", config.max_total_words}}},
            {"metric", to_string(metric)},
            {"pool", pool},
            {"n_models", n_models},
            {"aggregate", aggregate},
            {"failures", failures},
            {"rounds", {{"total", timing.total_rounds}, {"mean", timing.mean_rounds}}},
            {"total_words", timing.total_words},
            {"examples", std::move(examples_json)}};
  if (with_timing) {
    j["timing"] = {{"mean_extra_ms_per_word", timing.mean_extra_ms_per_word},
                   {"mean_generate_ms_per_word", timing.mean_generate_ms_per_word},
                   {"wall_ms", timing.wall_ms}};
  }
  return j;
}

namespace {

double score_prediction(Metric metric, const std::string& prediction, const EvalExample& ex) {
  switch (metric) {
    case Metric::em: return exact_match(prediction, ex.references) ? 100.0 : 0.0;
    case Metric::numeric: return numeric_match(prediction, ex.references) ? 100.0 : 0.0;
    case Metric::bleu: return corpus_bleu({prediction}, {ex.references});
  }
  return 0.0;
}

}  // namespace

EvalReport run_eval(const std::vector<EvalExample>& examples, const EnsemblePool& pool,
                    const EnsembleConfig& config, Metric metric, const EvalOptions& options) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();

  EvalReport report;
  report.config = config;
  report.metric = metric;
  report.pool = options.pool_label;
  report.n_models = pool.size();
  report.examples.resize(examples.size());

  parallel_for(examples.size(), std::max<std::size_t>(options.workers, 1), [&](std::size_t i) {
    const EvalExample& ex = examples[i];
    ExampleRecord& rec = report.examples[i];
    rec.id = ex.id;
    try {
      const Transcript t = generate(pool, ex.prompt, config);
      rec.prediction = t.final_text;
      rec.stop_reason = to_string(t.stop_reason);
      rec.rounds = t.rounds.size();
      rec.words = count_words(t.final_text);
      for (const auto& r : t.rounds) {
        rec.generate_ms += r.timings.generate_ms;
        rec.extra_ms += r.timings.score_ms + r.timings.select_ms;
      }
      rec.score = score_prediction(metric, rec.prediction, ex);
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.error = e.what();
      rec.score = 0.0;
    }
  });

  // BLEU is a corpus statistic, so it is computed before reordering.
  if (metric == Metric::bleu) {
    std::vector<std::string> hyps;
    std::vector<std::vector<std::string>> refs;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      hyps.push_back(report.examples[i].prediction);
      refs.push_back(examples[i].references);
    }
    report.aggregate = examples.empty() ? 0.0 : corpus_bleu(hyps, refs);
  } else {
    double sum = 0.0;
    for (const auto& r : report.examples) sum += r.score;
    report.aggregate = examples.empty() ? 0.0 : sum / static_cast<double>(examples.size());
  }

  std::stable_sort(report.examples.begin(), report.examples.end(),
                   [](const ExampleRecord& a, const ExampleRecord& b) { return a.id < b.id; });

  double extra = 0.0;
  double gen = 0.0;
  for (const auto& r : report.examples) {
    report.failures += r.failed ? 1 : 0;
    report.timing.total_rounds += r.rounds;
    report.timing.total_words += r.words;
    extra += r.extra_ms;
    gen += r.generate_ms;
  }
  if (!report.examples.empty()) {
    report.timing.mean_rounds =
        static_cast<double>(report.timing.total_rounds) / static_cast<double>(report.examples.size());
  }
  if (report.timing.total_words > 0) {
    report.timing.mean_extra_ms_per_word = extra / static_cast<double>(report.timing.total_words);
    report.timing.mean_generate_ms_per_word = gen / static_cast<double>(report.timing.total_words);
  }
  report.timing.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return report;
}

EvalReport run_eval(const std::filesystem::path& dataset_path, const std::filesystem::path& pool_config,
                    const EnsembleConfig& config, Metric metric, const EvalOptions& options) {
  const auto examples = load_dataset(dataset_path);
  const auto pool = load_pool(pool_config);
  EvalOptions opts = options;
  if (opts.pool_label.empty()) opts.pool_label = pool_config.stem().string();
  return run_eval(examples, pool, config, metric, opts);
}

void SweepSpec::validate() const {
  if (span_lengths.empty()) throw SweepSpecError("sweep spec: span_lengths is empty");
  if (lambdas.empty()) throw SweepSpecError("sweep spec: lambdas is empty");
  if (filters.empty()) throw SweepSpecError("sweep spec: filter is empty");
  for (auto l : span_lengths) {
    if (l == 0) throw SweepSpecError("sweep spec: span length 0");
  }
  for (auto l : lambdas) {
    if (!(l >= 0.0)) throw SweepSpecError("sweep spec: negative lambda");
  }
}

std::size_t SweepSpec::cell_count() const {
  return span_lengths.size() * lambdas.size() * filters.size() *
         std::max<std::size_t>(pool_scenarios.size(), 1);
}

SweepSpec parse_sweep_spec(const nlohmann::ordered_json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw SweepSpecError("sweep spec must be a JSON object");
  if (j.empty()) throw SweepSpecError("sweep spec is empty");

  auto resolve = [&](std::filesystem::path p) { return p.is_relative() ? base_dir / p : p; };
  SweepSpec spec;
  try {
    if (j.contains("span_lengths")) spec.span_lengths = j["span_lengths"].get<std::vector<std::size_t>>();
    if (j.contains("lambdas")) spec.lambdas = j["lambdas"].get<std::vector<double>>();
    if (j.contains("filter")) spec.filters = j["filter"].get<std::vector<bool>>();
    if (j.contains("pool_scenarios")) {
      const auto& ps = j["pool_scenarios"];
      if (ps.is_object()) {
        if (ps.empty()) throw SweepSpecError("sweep spec: pool_scenarios is empty");
        for (const auto& [name, path] : ps.items()) {
          spec.pool_scenarios.emplace_back(name, resolve(path.get<std::string>()));
        }
      } else {
        if (ps.empty()) throw SweepSpecError("sweep spec: pool_scenarios is empty");
        for (const auto& e : ps) {
          spec.pool_scenarios.emplace_back(e.at("name").get<std::string>(),
                                           resolve(e.at("path").get<std::string>()));
        }
      }
    }
    if (j.contains("dataset")) spec.dataset = resolve(j["dataset"].get<std::string>());
    if (j.contains("metric")) {
      spec.metric = parse_metric(j["metric"].get<std::string>());
      if (!spec.metric) throw SweepSpecError("sweep spec: unknown metric");
    }
    if (j.contains("max_words")) spec.max_words = j["max_words"].get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw SweepSpecError(std::string("sweep spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

SweepSpec load_sweep_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SweepSpecError("cannot open sweep spec " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  if (ss.str().find_first_not_of(" \t\r\n") == std::string::npos) throw SweepSpecError("sweep spec is empty");
  try {
    return parse_sweep_spec(nlohmann::ordered_json::parse(ss.str()), path.parent_path());
  } catch (const nlohmann::json::parse_error& e) {
    throw SweepSpecError(path.string() + ": " + e.what());
  }
}

std::vector<SweepCell> run_sweep(const SweepSpec& spec, const std::vector<EvalExample>& examples,
                                 const std::vector<std::pair<std::string, EnsemblePool>>& pools,
                                 const EnsembleConfig& base, Metric metric, const EvalOptions& options) {
  spec.validate();
  std::vector<SweepCell> cells;
  for (const auto& [pool_name, pool] : pools) {
    for (bool filter : spec.filters) {
      for (double lambda : spec.lambdas) {
        for (std::size_t span : spec.span_lengths) {
          SweepCell cell{span, lambda, filter, pool_name, std::nullopt, {}};
          try {
            EnsembleConfig cfg = base;
            cfg.span_length_words = span;
            cfg.lambda = lambda;
            cfg.filter_enabled = filter;
            if (spec.max_words) cfg.max_total_words = *spec.max_words;
            cfg.max_total_words = std::max(cfg.max_total_words, span);
            EvalOptions opts = options;
            opts.pool_label = pool_name;
            cell.report = run_eval(examples, pool, cfg, metric, opts);
          } catch (const std::exception& e) {
            cell.error = e.what();
          }
          cells.push_back(std::move(cell));
        }
      }
    }
  }
  return cells;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepCell>& cells, Metric metric) {
  out << "span_length,lambda,filter,pool,metric,value,mean_ms_per_word\n";
  for (const auto& c : cells) {
    if (!c.report) continue;
    std::ostringstream row;
    row << c.span_length << ',' << c.lambda << ',' << (c.filter ? "true" : "false") << ',' << c.pool << ','
        << to_string(metric) << ',' << c.report->aggregate << ',' << c.report->timing.mean_extra_ms_per_word;
    out << row.str() << '\n';
  }
}

}  // namespace spanens
