#include "sdsi/speaker_registry.hpp"

#include <mutex>

#include "sdsi/errors.hpp"
#include "sdsi/storage.hpp"

namespace sdsi {

using nlohmann::json;

json speaker_set_to_json(const SpeakerSet& set, bool with_embeddings) {
  json profiles = json::array();
  for (const auto& p : set.profiles) {
    json pj{{"speaker_id", p.speaker_id},
            {"display_name", p.display_name},
            {"n_utterances", p.n_utterances},
            {"enrolled_at", p.enrolled_at}};
    if (with_embeddings) pj["reference"] = p.reference.values;
    profiles.push_back(std::move(pj));
  }
  return {{"set_id", set.set_id}, {"backend_id", set.backend_id}, {"profiles", std::move(profiles)}};
}

SpeakerSet speaker_set_from_json(const json& j) {
  try {
    SpeakerSet set;
    set.set_id = j.at("set_id").get<std::string>();
    set.backend_id = j.at("backend_id").get<std::string>();
    for (const auto& pj : j.at("profiles")) {
      SpeakerProfile p;
      p.speaker_id = pj.at("speaker_id").get<std::string>();
      p.display_name = pj.at("display_name").get<std::string>();
      p.n_utterances = pj.at("n_utterances").get<int>();
      p.enrolled_at = pj.value("enrolled_at", std::int64_t{0});
      p.reference = {pj.at("reference").get<std::vector<double>>(), set.backend_id};
      set.profiles.push_back(std::move(p));
    }
    return set;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("speaker set document: ") + e.what());
  }
}

SpeakerRegistry::SpeakerRegistry(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (entry.path().extension() != ".json") continue;
    SpeakerSet set = speaker_set_from_json(json::parse(storage::read_text(entry.path())));
    sets_.emplace(set.set_id, std::move(set));
  }
}

std::vector<SpeakerSet> SpeakerRegistry::list() const {
  std::shared_lock lock(mu_);
  std::vector<SpeakerSet> out;
  for (const auto& [id, s] : sets_) out.push_back(s);
  return out;
}

std::optional<SpeakerSet> SpeakerRegistry::get(const std::string& set_id) const {
  std::shared_lock lock(mu_);
  const auto it = sets_.find(set_id);
  if (it == sets_.end()) return std::nullopt;
  return it->second;
}

bool SpeakerRegistry::exists(const std::string& set_id) const {
  std::shared_lock lock(mu_);
  return sets_.contains(set_id);
}

void SpeakerRegistry::persist(const SpeakerSet& set) const {
  storage::write_atomic(dir_ / (set.set_id + ".json"), speaker_set_to_json(set).dump(1) + "\n");
}

SpeakerSet SpeakerRegistry::create(const std::string& set_id, const std::string& backend_id) {
  if (!storage::is_safe_id(set_id)) throw Error(ErrorCode::InvalidArgument, "invalid set_id '" + set_id + "'");
  find_backend(backend_id);
  std::unique_lock lock(mu_);
  if (sets_.contains(set_id)) throw Error(ErrorCode::InvalidArgument, "speaker set '" + set_id + "' already exists");
  SpeakerSet set{set_id, backend_id, {}};
  persist(set);
  sets_.emplace(set_id, set);
  return set;
}

void SpeakerRegistry::ensure(const std::string& set_id, const std::string& backend_id) {
  {
    std::shared_lock lock(mu_);
    const auto it = sets_.find(set_id);
    if (it != sets_.end()) {
      if (it->second.backend_id != backend_id) {
        throw Error(ErrorCode::BackendMismatch, "speaker set '" + set_id + "' uses backend '" +
                                                    it->second.backend_id + "', setup wants '" + backend_id + "'");
      }
      return;
    }
  }
  try {
    create(set_id, backend_id);
  } catch (const Error& e) {
    if (!exists(set_id)) throw;
  }
}

SpeakerProfile SpeakerRegistry::enroll(const std::string& set_id, const std::string& display_name,
                                       const std::vector<AudioBuffer>& utterances) {
  std::string backend_id;
  {
    std::shared_lock lock(mu_);
    const auto it = sets_.find(set_id);
    if (it == sets_.end()) throw Error(ErrorCode::UnknownSpeakerSet, "no speaker set '" + set_id + "'");
    backend_id = it->second.backend_id;
  }
  const auto backend = find_backend(backend_id);
  // Embeddings are computed outside the lock; only the append is serialized.
  SpeakerSet scratch{set_id, backend_id, {}};
  SpeakerProfile draft = sdsi::enroll(scratch, display_name, utterances, *backend);

  std::unique_lock lock(mu_);
  auto it = sets_.find(set_id);
  if (it == sets_.end()) throw Error(ErrorCode::UnknownSpeakerSet, "speaker set '" + set_id + "' was deleted");
  SpeakerSet updated = it->second;
  const std::string slug = slugify(display_name);
  for (int counter = 1;; ++counter) {
    std::string candidate = slug + "-" + std::to_string(counter);
    if (!updated.find(candidate)) {
      draft.speaker_id = std::move(candidate);
      break;
    }
  }
  updated.profiles.push_back(draft);
  persist(updated);
  it->second = std::move(updated);
  return draft;
}

void SpeakerRegistry::remove_speaker(const std::string& set_id, const std::string& speaker_id) {
  std::unique_lock lock(mu_);
  auto it = sets_.find(set_id);
  if (it == sets_.end()) throw Error(ErrorCode::UnknownSpeakerSet, "no speaker set '" + set_id + "'");
  SpeakerSet updated = it->second;
  if (!updated.remove(speaker_id)) {
    throw Error(ErrorCode::NotFound, "no speaker '" + speaker_id + "' in set '" + set_id + "'");
  }
  persist(updated);
  it->second = std::move(updated);
}

}  // namespace sdsi
