#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "autothink/surrogate.h"
#include "autothink/trainer.h"

namespace autothink {

inline constexpr const char* kVersion = "0.1.0";

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PolicyInit {
  double think_logit = 0.0;
  double length_logit = 0.0;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "runs/default";
  unsigned workers = 1;
  EnvParams env;
  PolicyInit policy_init;
  std::vector<StageConfig> schedule = default_schedule();
  std::optional<SweepGrid> sweep_grid;
  SweepOptions sweep_options;

  SurrogatePolicy initial_policy() const;
  void validate() const;
};

/// Strict parse: unknown keys and wrong types are errors. Missing keys take
/// the defaults above. Throws ConfigError with the offending path.
ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

SweepGrid grid_from_json(const nlohmann::json& doc);

/// FNV-1a 64 of the canonical JSON form, as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);
std::string config_hash(const ExperimentConfig& cfg);

/// Fields in declaration order.
nlohmann::ordered_json to_json(const TrainLogRecord& rec);
TrainLogRecord log_record_from_json(const nlohmann::json& j);

nlohmann::json checkpoint_json(const Checkpoint& ckpt, const std::string& config_hash);
SurrogatePolicy policy_from_checkpoint(const nlohmann::json& j);

nlohmann::json run_manifest(const ExperimentConfig& cfg, const std::string& command,
                            const std::vector<std::string>& files);

/// Exclusive marker file in an output directory; removed on destruction.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::filesystem::path path_;
};

}  // namespace autothink
