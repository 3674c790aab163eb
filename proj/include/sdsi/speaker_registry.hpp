#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdsi/identification.hpp"

namespace sdsi {

nlohmann::json speaker_set_to_json(const SpeakerSet& set, bool with_embeddings = true);
SpeakerSet speaker_set_from_json(const nlohmann::json& j);

// Persistent speaker sets, one JSON document per set. Reads run concurrently;
// writers are serialized. get() returns a copy, which is the snapshot a job
// works from.
class SpeakerRegistry {
 public:
  explicit SpeakerRegistry(std::filesystem::path dir);

  std::vector<SpeakerSet> list() const;
  std::optional<SpeakerSet> get(const std::string& set_id) const;
  bool exists(const std::string& set_id) const;

  // Throws InvalidArgument when the set already exists.
  SpeakerSet create(const std::string& set_id, const std::string& backend_id);
  // Creates an empty set if missing; BackendMismatch if it exists with another backend.
  void ensure(const std::string& set_id, const std::string& backend_id);

  SpeakerProfile enroll(const std::string& set_id, const std::string& display_name,
                        const std::vector<AudioBuffer>& utterances);
  void remove_speaker(const std::string& set_id, const std::string& speaker_id);

 private:
  void persist(const SpeakerSet& set) const;

  std::filesystem::path dir_;
  mutable std::shared_mutex mu_;
  std::map<std::string, SpeakerSet> sets_;
};

}  // namespace sdsi
