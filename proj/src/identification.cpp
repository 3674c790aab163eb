#include "sdsi/identification.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>

#include "sdsi/errors.hpp"

namespace sdsi {

const SpeakerProfile* SpeakerSet::find(const std::string& speaker_id) const {
  for (const auto& p : profiles) {
    if (p.speaker_id == speaker_id) return &p;
  }
  return nullptr;
}

bool SpeakerSet::remove(const std::string& speaker_id) {
  const auto it = std::find_if(profiles.begin(), profiles.end(),
                               [&](const SpeakerProfile& p) { return p.speaker_id == speaker_id; });
  if (it == profiles.end()) return false;
  profiles.erase(it);
  return true;
}

std::string to_string(DecisionKind kind) {
  switch (kind) {
    case DecisionKind::Known: return "known";
    case DecisionKind::Unknown: return "unknown";
    case DecisionKind::None: return "none";
  }
  return "none";
}

DecisionKind decision_kind_from_string(const std::string& s) {
  if (s == "known") return DecisionKind::Known;
  if (s == "unknown") return DecisionKind::Unknown;
  if (s == "none") return DecisionKind::None;
  throw Error(ErrorCode::SchemaViolation, "unknown decision kind '" + s + "'");
}

std::string slugify(const std::string& name) {
  std::string out;
  for (unsigned char c : name) {
    if (std::isalnum(c)) {
      out.push_back(static_cast<char>(std::tolower(c)));
    } else if (!out.empty() && out.back() != '-') {
      out.push_back('-');
    }
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out.empty() ? "speaker" : out;
}

SpeakerProfile enroll(SpeakerSet& set, const std::string& display_name,
                      const std::vector<AudioBuffer>& utterances, const EmbeddingBackend& backend) {
  if (set.backend_id.empty()) set.backend_id = backend.id();
  if (set.backend_id != backend.id()) {
    throw Error(ErrorCode::BackendMismatch, "set uses '" + set.backend_id + "', got '" + backend.id() + "'");
  }
  if (utterances.empty()) throw Error(ErrorCode::EmptyInput, "no enrollment utterances");
  if (display_name.empty()) throw Error(ErrorCode::InvalidArgument, "empty display name");

  std::vector<SpeakerEmbedding> embeddings;
  for (const auto& u : utterances) embeddings.push_back(backend.extract(u));

  SpeakerProfile p;
  p.display_name = display_name;
  p.reference = mean_embedding(embeddings);
  p.n_utterances = static_cast<int>(utterances.size());
  p.enrolled_at = std::chrono::duration_cast<std::chrono::seconds>(
                      std::chrono::system_clock::now().time_since_epoch())
                      .count();
  const std::string slug = slugify(display_name);
  for (int counter = 1;; ++counter) {
    std::string candidate = slug + "-" + std::to_string(counter);
    if (!set.find(candidate)) {
      p.speaker_id = std::move(candidate);
      break;
    }
  }
  set.profiles.push_back(p);
  return p;
}

IdentityDecision identify(const SpeakerEmbedding& centroid, const SpeakerSet& set,
                          const IdentificationParams& params) {
  IdentityDecision d;
  if (set.profiles.empty()) {
    if (!params.open_set) throw Error(ErrorCode::EmptySet, "closed-set identification needs profiles");
    d.kind = DecisionKind::Unknown;
    return d;
  }
  const SpeakerProfile* best = nullptr;
  double best_score = -2.0;
  for (const auto& p : set.profiles) {
    const double s = cosine_score(centroid, p.reference);
    d.scores[p.speaker_id] = s;
    if (s > best_score) {
      best_score = s;
      best = &p;
    }
  }
  if (params.open_set && best_score < params.threshold) {
    d.kind = DecisionKind::Unknown;
    return d;
  }
  d.kind = DecisionKind::Known;
  d.speaker_id = best->speaker_id;
  d.score = best_score;
  return d;
}

LabeledDiarization assign_labels(const DiarizationOutput& d, const SpeakerSet& set,
                                 const IdentificationParams& params) {
  std::map<std::string, IdentityDecision> decisions;
  std::map<std::string, std::string> display;
  int unknown = 0;
  for (const auto& label : d.labels_in_order()) {
    IdentityDecision dec = identify(d.centroids.at(label), set, params);
    if (dec.kind == DecisionKind::Unknown) {
      dec.unknown_index = ++unknown;
      display[label] = "Speaker" + std::to_string(dec.unknown_index);
    } else {
      display[label] = set.find(dec.speaker_id)->display_name;
    }
    decisions[label] = std::move(dec);
  }
  LabeledDiarization out;
  for (const auto& s : d.segments) {
    out.segments.push_back({s.interval, display.at(s.label), s.label, decisions.at(s.label)});
  }
  return out;
}

LabeledDiarization cluster_labels(const DiarizationOutput& d) {
  LabeledDiarization out;
  for (const auto& s : d.segments) out.segments.push_back({s.interval, s.label, s.label, {}});
  return out;
}

SpeakerEmbedding refine_centroid(const std::vector<Subsegment>& subsegs,
                                 const std::vector<TimeInterval>& overlap) {
  if (subsegs.empty()) throw Error(ErrorCode::EmptyInput, "no subsegments");
  std::vector<SpeakerEmbedding> clean, all;
  for (const auto& s : subsegs) {
    all.push_back(s.embedding);
    const bool touched = std::any_of(overlap.begin(), overlap.end(), [&](const TimeInterval& o) {
      return sdsi::overlap(s.interval, o) > 0.0;
    });
    if (!touched) clean.push_back(s.embedding);
  }
  return mean_embedding(clean.empty() ? all : clean);
}

DiarizationOutput refine_centroids(DiarizationOutput d, const std::vector<TimeInterval>& overlap) {
  if (overlap.empty()) return d;
  for (auto& [label, centroid] : d.centroids) {
    const auto members = d.members(label);
    if (!members.empty()) centroid = refine_centroid(members, overlap);
  }
  return d;
}

}  // namespace sdsi
