#include "sdsi/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <set>

#include "sdsi/embedding.hpp"
#include "sdsi/errors.hpp"
#include "sdsi/storage.hpp"
#include "sdsi/transcript.hpp"

namespace sdsi {
namespace {

using nlohmann::json;

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::ConfigError, std::string("wrong type for '") + key + "'");
  }
}

}  // namespace

std::string to_string(Preprocessing p) { return p == Preprocessing::SD ? "SD" : "VAD_ONLY"; }

json setup_to_json(const ConfigSetup& s) {
  json dia{{"window_s", s.diarization.window_s},
           {"hop_s", s.diarization.hop_s},
           {"min_subseg_s", s.diarization.min_subseg_s},
           {"ahc_threshold", s.diarization.ahc_threshold}};
  dia["num_speakers"] = s.diarization.num_speakers ? json(*s.diarization.num_speakers) : json(nullptr);
  return {{"setup_id", s.setup_id},
          {"title", s.title},
          {"description", s.description},
          {"preprocessing", to_string(s.preprocessing)},
          {"backend_id", s.backend_id},
          {"diarization", dia},
          {"vad",
           {{"margin_db", s.vad.margin_db},
            {"floor_percentile", s.vad.floor_percentile},
            {"min_speech_s", s.vad.min_speech_s},
            {"min_gap_s", s.vad.min_gap_s},
            {"pad_s", s.vad.pad_s}}},
          {"si",
           {{"enabled", s.si.enabled},
            {"speaker_set_id", s.si.speaker_set_id},
            {"open_set", s.si.params.open_set},
            {"threshold", s.si.params.threshold}}},
          {"asr", {{"engine_id", s.asr.engine_id}, {"language", s.asr.language}}}};
}

ConfigSetup setup_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "setup must be an object");
  ConfigSetup s;
  s.setup_id = get_or<std::string>(j, "setup_id", "");
  if (!storage::is_safe_id(s.setup_id)) throw Error(ErrorCode::ConfigError, "invalid setup_id '" + s.setup_id + "'");
  s.title = get_or<std::string>(j, "title", s.setup_id);
  s.description = get_or<std::string>(j, "description", "");
  const auto pre = get_or<std::string>(j, "preprocessing", "SD");
  if (pre == "SD") {
    s.preprocessing = Preprocessing::SD;
  } else if (pre == "VAD_ONLY") {
    s.preprocessing = Preprocessing::VadOnly;
  } else {
    throw Error(ErrorCode::ConfigError, "preprocessing must be SD or VAD_ONLY, got '" + pre + "'");
  }
  s.backend_id = get_or<std::string>(j, "backend_id", s.backend_id);

  const json dia = j.value("diarization", json::object());
  s.diarization.window_s = get_or(dia, "window_s", s.diarization.window_s);
  s.diarization.hop_s = get_or(dia, "hop_s", s.diarization.hop_s);
  s.diarization.min_subseg_s = get_or(dia, "min_subseg_s", s.diarization.min_subseg_s);
  s.diarization.ahc_threshold = get_or(dia, "ahc_threshold", s.diarization.ahc_threshold);
  if (dia.contains("num_speakers") && !dia.at("num_speakers").is_null()) {
    s.diarization.num_speakers = get_or<int>(dia, "num_speakers", 0);
  }

  const json vad = j.value("vad", json::object());
  s.vad.margin_db = get_or(vad, "margin_db", s.vad.margin_db);
  s.vad.floor_percentile = get_or(vad, "floor_percentile", s.vad.floor_percentile);
  s.vad.min_speech_s = get_or(vad, "min_speech_s", s.vad.min_speech_s);
  s.vad.min_gap_s = get_or(vad, "min_gap_s", s.vad.min_gap_s);
  s.vad.pad_s = get_or(vad, "pad_s", s.vad.pad_s);

  const json si = j.value("si", json::object());
  s.si.enabled = get_or(si, "enabled", false);
  s.si.speaker_set_id = get_or<std::string>(si, "speaker_set_id", "");
  s.si.params.open_set = get_or(si, "open_set", true);
  s.si.params.threshold = get_or(si, "threshold", s.si.params.threshold);

  const json asr = j.value("asr", json::object());
  s.asr.engine_id = get_or<std::string>(asr, "engine_id", s.asr.engine_id);
  s.asr.language = get_or<std::string>(asr, "language", s.asr.language);

  try {
    s.diarization.validate();
    s.vad.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, "setup '" + s.setup_id + "': " + e.what());
  }
  if (s.si.params.threshold < -1.0 || s.si.params.threshold > 1.0) {
    throw Error(ErrorCode::ConfigError, "setup '" + s.setup_id + "': threshold outside [-1, 1]");
  }
  if (s.si.enabled && !storage::is_safe_id(s.si.speaker_set_id)) {
    throw Error(ErrorCode::ConfigError, "setup '" + s.setup_id + "': SI enabled without a valid speaker_set_id");
  }
  try {
    find_backend(s.backend_id);
    make_asr_engine(s.asr.engine_id);
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, "setup '" + s.setup_id + "': " + e.what());
  }
  return s;
}

ServiceConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, std::string("configuration is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "configuration must be an object");
  ServiceConfig cfg;
  cfg.workers = get_or(j, "workers", cfg.workers);
  cfg.data_dir = get_or(j, "data_dir", cfg.data_dir);
  cfg.port = get_or(j, "port", cfg.port);
  cfg.max_upload_bytes = static_cast<std::size_t>(get_or<double>(j, "max_upload_mb", 512.0) * 1024.0 * 1024.0);
  cfg.static_dir = get_or<std::string>(j, "static_dir", "");
  if (cfg.workers < 1) throw Error(ErrorCode::ConfigError, "workers must be at least 1");
  if (!j.contains("setups") || !j.at("setups").is_array()) {
    throw Error(ErrorCode::ConfigError, "'setups' array missing");
  }
  std::set<std::string> seen;
  for (const auto& sj : j.at("setups")) {
    ConfigSetup s = setup_from_json(sj);
    if (!seen.insert(s.setup_id).second) throw Error(ErrorCode::ConfigError, "duplicate setup_id '" + s.setup_id + "'");
    cfg.setups.push_back(std::move(s));
  }
  return cfg;
}

ServiceConfig load_config(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) throw Error(ErrorCode::ConfigError, "no configuration file at " + path);
  ServiceConfig cfg = parse_config(storage::read_text(path));
  if (!cfg.static_dir.empty() && std::filesystem::path(cfg.static_dir).is_relative()) {
    cfg.static_dir = (std::filesystem::path(path).parent_path() / cfg.static_dir).string();
  }
  return cfg;
}

void apply_env_overrides(ServiceConfig& cfg) {
  if (const char* port = std::getenv("SDSI_PORT"); port && *port) {
    try {
      cfg.port = std::stoi(port);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError, std::string("SDSI_PORT is not a number: ") + port);
    }
  }
  if (const char* dir = std::getenv("SDSI_DATA_DIR"); dir && *dir) cfg.data_dir = dir;
}

const ConfigSetup& find_setup(const std::vector<ConfigSetup>& catalog, const std::string& setup_id) {
  for (const auto& s : catalog) {
    if (s.setup_id == setup_id) return s;
  }
  throw Error(ErrorCode::UnknownSetup, "no setup '" + setup_id + "'");
}

}  // namespace sdsi
