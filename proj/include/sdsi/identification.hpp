#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sdsi/diarization.hpp"
#include "sdsi/embedding.hpp"

namespace sdsi {

struct SpeakerProfile {
  std::string speaker_id;
  std::string display_name;
  SpeakerEmbedding reference;
  int n_utterances = 1;
  std::int64_t enrolled_at = 0;  // unix seconds
};

struct SpeakerSet {
  std::string set_id;
  std::string backend_id;
  std::vector<SpeakerProfile> profiles;  // enrollment order

  const SpeakerProfile* find(const std::string& speaker_id) const;
  bool remove(const std::string& speaker_id);
};

struct IdentificationParams {
  bool open_set = true;
  double threshold = 0.6;
};

enum class DecisionKind { Known, Unknown, None };

struct IdentityDecision {
  DecisionKind kind = DecisionKind::None;
  std::string speaker_id;  // Known
  double score = 0.0;      // Known
  int unknown_index = 0;   // Unknown, assigned by assign_labels (0 = not yet numbered)
  std::map<std::string, double> scores;

  bool operator==(const IdentityDecision&) const = default;
};

std::string to_string(DecisionKind kind);
DecisionKind decision_kind_from_string(const std::string& s);

struct LabeledSegment {
  TimeInterval interval;
  std::string label;    // final display label
  std::string cluster;  // "C1".. or "" when not clustered
  IdentityDecision decision;
};

struct LabeledDiarization {
  std::vector<LabeledSegment> segments;
};

// Appends a new profile whose reference is the mean utterance embedding.
// speaker_id is a slug of display_name plus a counter unique within the set.
SpeakerProfile enroll(SpeakerSet& set, const std::string& display_name,
                      const std::vector<AudioBuffer>& utterances, const EmbeddingBackend& backend);

IdentityDecision identify(const SpeakerEmbedding& centroid, const SpeakerSet& set,
                          const IdentificationParams& params);

// One decision per cluster centroid. Unknown clusters become Speaker1..SpeakerN
// in order of first appearance; known clusters take the profile display name.
LabeledDiarization assign_labels(const DiarizationOutput& d, const SpeakerSet& set,
                                 const IdentificationParams& params);

// Keeps C-labels, no identification.
LabeledDiarization cluster_labels(const DiarizationOutput& d);

// Mean over subsegments that touch no overlap interval; falls back to the
// plain mean when every subsegment is excluded.
SpeakerEmbedding refine_centroid(const std::vector<Subsegment>& subsegs,
                                 const std::vector<TimeInterval>& overlap);

// Replaces each cluster centroid with its refined counterpart.
DiarizationOutput refine_centroids(DiarizationOutput d, const std::vector<TimeInterval>& overlap);

std::string slugify(const std::string& name);

}  // namespace sdsi
