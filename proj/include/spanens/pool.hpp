#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "spanens/backend.hpp"

namespace spanens {

class PoolConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ordered ensemble members. A model's position is its index everywhere.
class EnsemblePool {
 public:
  EnsemblePool() = default;
  explicit EnsemblePool(std::vector<std::shared_ptr<const Backend>> models);

  std::size_t size() const { return models_.size(); }
  const Backend& at(std::size_t index) const { return *models_.at(index); }
  const std::vector<std::shared_ptr<const Backend>>& models() const { return models_; }

 private:
  std::vector<std::shared_ptr<const Backend>> models_;
};

struct PoolLoadOptions {
  // Overrides the timeout of every HTTP entry when set.
  std::optional<int> timeout_ms;
};

/// Reads a JSON list of {"type": "table"|"http", ...} entries. Relative
/// table paths resolve against the config file's directory.
EnsemblePool load_pool(const std::filesystem::path& config_path, const PoolLoadOptions& options = {});

}  // namespace spanens
