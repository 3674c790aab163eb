#include "sdsi/diarization.hpp"

#include <algorithm>
#include <limits>

#include "sdsi/errors.hpp"
#include "sdsi/kernels.hpp"

namespace sdsi {
namespace {

constexpr double kTieEpsilon = 1e-12;
constexpr double kTimeEpsilon = 1e-9;

}  // namespace

void DiarizationParams::validate() const {
  if (window_s <= 0.0 || hop_s <= 0.0 || hop_s > window_s) {
    throw Error(ErrorCode::InvalidArgument, "diarization window/hop invalid");
  }
  if (!(ahc_threshold > 0.0 && ahc_threshold < 2.0)) {
    throw Error(ErrorCode::InvalidArgument, "ahc_threshold must be in (0, 2)");
  }
  if (num_speakers && *num_speakers < 1) {
    throw Error(ErrorCode::InvalidArgument, "num_speakers must be positive");
  }
}

std::vector<std::string> DiarizationOutput::labels_in_order() const {
  std::vector<std::string> out;
  for (const auto& s : segments) {
    if (std::find(out.begin(), out.end(), s.label) == out.end()) out.push_back(s.label);
  }
  for (const auto& l : subsegment_labels) {
    if (std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
  }
  return out;
}

std::vector<Subsegment> DiarizationOutput::members(const std::string& label) const {
  std::vector<Subsegment> out;
  for (std::size_t i = 0; i < subsegments.size() && i < subsegment_labels.size(); ++i) {
    if (subsegment_labels[i] == label) out.push_back(subsegments[i]);
  }
  return out;
}

std::vector<TimeInterval> subsegment(const std::vector<TimeInterval>& speech,
                                     const DiarizationParams& params) {
  params.validate();
  std::vector<TimeInterval> out;
  for (const auto& iv : speech) {
    for (long i = 0;; ++i) {
      const double start = iv.start_s + static_cast<double>(i) * params.hop_s;
      if (start >= iv.end_s - kTimeEpsilon) break;
      const double end = std::min(start + params.window_s, iv.end_s);
      if (end - start >= params.min_subseg_s - kTimeEpsilon) out.push_back({start, end});
      if (end >= iv.end_s - kTimeEpsilon) break;
    }
  }
  return out;
}

std::vector<int> ahc_cluster(const std::vector<SpeakerEmbedding>& embeddings,
                             const DiarizationParams& params) {
  params.validate();
  if (embeddings.empty()) throw Error(ErrorCode::EmptyInput, "nothing to cluster");
  std::vector<std::vector<double>> vecs;
  vecs.reserve(embeddings.size());
  for (const auto& e : embeddings) {
    if (e.backend_id != embeddings.front().backend_id || e.dim() != embeddings.front().dim()) {
      throw Error(ErrorCode::BackendMismatch, "embeddings from different backends");
    }
    vecs.push_back(e.values);
  }

  const std::size_t n = vecs.size();
  std::vector<double> link = kernels::cosine_distance_matrix_parallel(vecs);
  std::vector<std::size_t> parent(n), size(n, 1);
  std::vector<bool> active(n, true);
  for (std::size_t i = 0; i < n; ++i) parent[i] = i;
  std::size_t clusters = n;
  const std::size_t target = params.num_speakers ? static_cast<std::size_t>(*params.num_speakers) : 1;

  while (clusters > target) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (active[j] && link[i * n + j] < best - kTieEpsilon) {
          best = link[i * n + j];
          bi = i;
          bj = j;
        }
      }
    }
    if (!params.num_speakers && !(best < params.ahc_threshold)) break;

    // Lance-Williams update for average linkage; bi keeps the merged cluster.
    const auto na = static_cast<double>(size[bi]), nb = static_cast<double>(size[bj]);
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == bi || k == bj) continue;
      const double d = (na * link[k * n + bi] + nb * link[k * n + bj]) / (na + nb);
      link[k * n + bi] = link[bi * n + k] = d;
    }
    active[bj] = false;
    size[bi] += size[bj];
    parent[bj] = bi;
    --clusters;
  }

  std::vector<int> labels(n, -1);
  std::vector<int> rep_label(n, -1);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = i;
    while (parent[r] != r) r = parent[r];
    if (rep_label[r] < 0) rep_label[r] = next++;
    labels[i] = rep_label[r];
  }
  return labels;
}

DiarizationOutput assemble(const std::vector<Subsegment>& subsegs, const std::vector<int>& labels) {
  if (subsegs.size() != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(subsegs.size()) + " subsegments vs " +
                                               std::to_string(labels.size()) + " labels");
  }
  DiarizationOutput out;
  if (subsegs.empty()) return out;

  std::vector<std::size_t> order(subsegs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return subsegs[a].interval.start_s < subsegs[b].interval.start_s;
  });

  std::map<int, std::string> names;
  for (std::size_t idx : order) {
    if (!names.contains(labels[idx])) names[labels[idx]] = "C" + std::to_string(names.size() + 1);
  }

  DiarizedSegment cur{subsegs[order[0]].interval, names[labels[order[0]]]};
  auto flush = [&out](const DiarizedSegment& s) {
    if (s.interval.end_s > s.interval.start_s + kTimeEpsilon) out.segments.push_back(s);
  };
  for (std::size_t k = 1; k < order.size(); ++k) {
    const auto& iv = subsegs[order[k]].interval;
    const std::string& name = names[labels[order[k]]];
    if (iv.start_s <= cur.interval.end_s + kTimeEpsilon && name == cur.label) {
      cur.interval.end_s = std::max(cur.interval.end_s, iv.end_s);
    } else if (iv.start_s < cur.interval.end_s) {
      const double mid = 0.5 * (iv.start_s + cur.interval.end_s);
      cur.interval.end_s = mid;
      flush(cur);
      cur = {{mid, iv.end_s}, name};
    } else {
      flush(cur);
      cur = {iv, name};
    }
  }
  flush(cur);

  // A segment may have been squeezed out entirely; re-merge equal-label
  // neighbours that now touch.
  std::vector<DiarizedSegment> merged;
  for (auto& s : out.segments) {
    if (!merged.empty() && merged.back().label == s.label &&
        s.interval.start_s <= merged.back().interval.end_s + kTimeEpsilon) {
      merged.back().interval.end_s = std::max(merged.back().interval.end_s, s.interval.end_s);
    } else {
      merged.push_back(s);
    }
  }
  out.segments = std::move(merged);

  out.subsegments = subsegs;
  for (int l : labels) out.subsegment_labels.push_back(names[l]);
  for (const auto& [raw, name] : names) {
    std::vector<SpeakerEmbedding> members;
    for (std::size_t i = 0; i < subsegs.size(); ++i) {
      if (labels[i] == raw) members.push_back(subsegs[i].embedding);
    }
    out.centroids.emplace(name, mean_embedding(members));
  }
  return out;
}

DiarizationOutput diarize_speech(const AudioBuffer& buf, const std::vector<TimeInterval>& speech,
                                 const EmbeddingBackend& backend, const DiarizationParams& dp) {
  dp.validate();
  const std::vector<TimeInterval> windows = subsegment(speech, dp);
  if (windows.empty()) return {};
  std::vector<AudioBuffer> clips;
  clips.reserve(windows.size());
  for (const auto& w : windows) clips.push_back(slice(buf, w));
  std::vector<SpeakerEmbedding> embeddings = extract_batch_parallel(backend, clips);

  std::vector<Subsegment> subsegs;
  subsegs.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) subsegs.push_back({windows[i], std::move(embeddings[i])});
  std::vector<SpeakerEmbedding> for_clustering;
  for (const auto& s : subsegs) for_clustering.push_back(s.embedding);
  return assemble(subsegs, ahc_cluster(for_clustering, dp));
}

DiarizationOutput diarize(const AudioBuffer& buf, const EmbeddingBackend& backend, const VadParams& vp,
                          const DiarizationParams& dp) {
  if (buf.empty()) throw Error(ErrorCode::EmptyInput, "empty audio");
  return diarize_speech(buf, detect_speech(buf, vp), backend, dp);
}

}  // namespace sdsi
