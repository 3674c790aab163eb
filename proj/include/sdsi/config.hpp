#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdsi/diarization.hpp"
#include "sdsi/identification.hpp"
#include "sdsi/vad.hpp"

namespace sdsi {

enum class Preprocessing { SD, VadOnly };

std::string to_string(Preprocessing p);

struct SiConfig {
  bool enabled = false;
  std::string speaker_set_id;
  IdentificationParams params;
};

struct AsrConfig {
  std::string engine_id = "mock";
  std::string language = "en";
};

// A named pipeline preset selectable by users.
struct ConfigSetup {
  std::string setup_id;
  std::string title;
  std::string description;
  Preprocessing preprocessing = Preprocessing::SD;
  DiarizationParams diarization;
  VadParams vad;
  std::string backend_id = "baseline-logmel-stats";
  SiConfig si;
  AsrConfig asr;
};

struct ServiceConfig {
  int workers = 2;
  std::string data_dir = "data";
  int port = 8080;
  std::size_t max_upload_bytes = std::size_t{512} * 1024 * 1024;
  std::string static_dir;  // web UI assets, served under / when present
  std::vector<ConfigSetup> setups;
};

nlohmann::json setup_to_json(const ConfigSetup& s);
ConfigSetup setup_from_json(const nlohmann::json& j);

// Throws ConfigError on malformed documents, duplicate setup ids, unknown
// backends or ASR engines.
ServiceConfig parse_config(const std::string& json_text);
ServiceConfig load_config(const std::string& path);

// SDSI_PORT and SDSI_DATA_DIR take precedence over the file.
void apply_env_overrides(ServiceConfig& cfg);

const ConfigSetup& find_setup(const std::vector<ConfigSetup>& catalog, const std::string& setup_id);

}  // namespace sdsi
