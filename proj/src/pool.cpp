#include "spanens/pool.hpp"

#include <fstream>

#include "json.hpp"
#include "spanens/http_backend.hpp"
#include "spanens/table_lm.hpp"

namespace spanens {

EnsemblePool::EnsemblePool(std::vector<std::shared_ptr<const Backend>> models)
    : models_(std::move(models)) {
  if (models_.empty()) throw PoolConfigError("pool has no models");
  for (const auto& m : models_) {
    if (!m) throw PoolConfigError("pool contains a null backend");
  }
}

namespace {

std::shared_ptr<const Backend> make_backend(const nlohmann::json& entry, std::size_t index,
                                            const std::filesystem::path& base_dir,
                                            const PoolLoadOptions& options) {
  const std::string where = "pool entry " + std::to_string(index);
  if (!entry.is_object()) throw PoolConfigError(where + ": expected an object");
  const std::string type = entry.value("type", std::string());

  if (type == "table") {
    const std::string name = entry.value("name", "model" + std::to_string(index));
    if (entry.contains("path")) {
      std::filesystem::path p = entry["path"].get<std::string>();
      if (p.is_relative()) p = base_dir / p;
      auto lm = TableLM::load(p);
      if (entry.contains("name")) {
        TableSpec spec = lm.spec();
        spec.name = name;
        return std::make_shared<TableLM>(std::move(spec));
      }
      return std::make_shared<TableLM>(std::move(lm));
    }
    if (entry.contains("table")) {
      nlohmann::json table = entry["table"];
      if (entry.contains("name")) table["name"] = name;
      return std::make_shared<TableLM>(TableLM::from_json(table, name));
    }
    throw PoolConfigError(where + ": table entry needs \"path\" or \"table\"");
  }
  if (type == "http") {
    HttpBackendConfig cfg = HttpBackendConfig::from_json(entry);
    if (options.timeout_ms) cfg.timeout_ms = *options.timeout_ms;
    return std::make_shared<HttpBackend>(std::move(cfg));
  }
  throw PoolConfigError(where + ": unknown type '" + type + "'");
}

}  // namespace

EnsemblePool load_pool(const std::filesystem::path& config_path, const PoolLoadOptions& options) {
  std::ifstream in(config_path);
  if (!in) throw PoolConfigError("cannot open pool config " + config_path.string());

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw PoolConfigError(config_path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw PoolConfigError(config_path.string() + ": expected a JSON list of models");
  if (doc.empty()) throw PoolConfigError(config_path.string() + ": pool has no models");

  std::vector<std::shared_ptr<const Backend>> models;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    std::shared_ptr<const Backend> backend;
    try {
      backend = make_backend(doc[i], i, config_path.parent_path(), options);
    } catch (const PoolConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw PoolConfigError("pool entry " + std::to_string(i) + ": " + e.what());
    }
    if (!backend->supports_scoring()) {
      throw PoolConfigError("pool entry " + std::to_string(i) + " (" + backend->name() +
                            ") cannot score spans");
    }
    models.push_back(std::move(backend));
  }
  return EnsemblePool(std::move(models));
}

}  // namespace spanens
