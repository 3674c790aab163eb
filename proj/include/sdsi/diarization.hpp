#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sdsi/audio.hpp"
#include "sdsi/embedding.hpp"
#include "sdsi/vad.hpp"

namespace sdsi {

struct DiarizationParams {
  double window_s = 1.5;
  double hop_s = 0.75;
  double min_subseg_s = 0.5;
  double ahc_threshold = 0.4;  // cosine-distance stop
  std::optional<int> num_speakers;

  void validate() const;
};

struct Subsegment {
  TimeInterval interval;
  SpeakerEmbedding embedding;
};

struct DiarizedSegment {
  TimeInterval interval;
  std::string label;  // "C1".."Ck"

  bool operator==(const DiarizedSegment&) const = default;
};

struct DiarizationOutput {
  std::vector<DiarizedSegment> segments;
  std::map<std::string, SpeakerEmbedding> centroids;
  // Clustering inputs kept for identification refinement.
  std::vector<Subsegment> subsegments;
  std::vector<std::string> subsegment_labels;

  std::vector<std::string> labels_in_order() const;  // by first appearance
  std::vector<Subsegment> members(const std::string& label) const;
};

std::vector<TimeInterval> subsegment(const std::vector<TimeInterval>& speech,
                                     const DiarizationParams& params = {});

// Average-linkage agglomerative clustering under cosine distance. Clusters are
// identified by their smallest member index; among pairs whose linkage ties
// (within 1e-12) the lexicographically smallest pair merges first. Returned
// labels are dense, numbered by first member.
std::vector<int> ahc_cluster(const std::vector<SpeakerEmbedding>& embeddings,
                             const DiarizationParams& params = {});

DiarizationOutput assemble(const std::vector<Subsegment>& subsegs, const std::vector<int>& labels);

DiarizationOutput diarize(const AudioBuffer& buf, const EmbeddingBackend& backend,
                          const VadParams& vp = {}, const DiarizationParams& dp = {});

// Same pipeline starting from already detected speech.
DiarizationOutput diarize_speech(const AudioBuffer& buf, const std::vector<TimeInterval>& speech,
                                 const EmbeddingBackend& backend, const DiarizationParams& dp = {});

}  // namespace sdsi
