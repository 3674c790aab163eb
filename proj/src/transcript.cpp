#include "sdsi/transcript.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "sdsi/errors.hpp"

namespace sdsi {
namespace {

using nlohmann::json;

constexpr double kTokensPerSecond = 3.0;

// Index of the diarization segment that best covers iv: maximum overlap,
// else smallest boundary distance; earlier segment on ties.
std::size_t best_segment(const TimeInterval& iv, const std::vector<LabeledSegment>& segs) {
  std::size_t best = 0;
  double best_overlap = 0.0;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const double o = overlap(iv, segs[i].interval);
    if (o > best_overlap) {
      best_overlap = o;
      best = i;
    }
  }
  if (best_overlap > 0.0) return best;
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const double gap = std::max({segs[i].interval.start_s - iv.end_s, iv.start_s - segs[i].interval.end_s, 0.0});
    if (gap < best_gap) {
      best_gap = gap;
      best = i;
    }
  }
  return best;
}

AttributedSegment from_labeled(const TimeInterval& iv, std::string text, const LabeledSegment& seg) {
  return {iv, seg.label, std::move(text), seg.cluster, seg.decision};
}

std::string join_words(const std::vector<Word>& words, std::size_t from, std::size_t to) {
  std::string out;
  for (std::size_t i = from; i < to; ++i) {
    if (!out.empty()) out.push_back(' ');
    out += words[i].text;
  }
  return out;
}

json decision_to_json(const IdentityDecision& d) {
  json j{{"kind", to_string(d.kind)}, {"scores", json::object()}};
  for (const auto& [id, s] : d.scores) j["scores"][id] = s;
  if (d.kind == DecisionKind::Known) j["speaker_id"] = d.speaker_id;
  if (d.kind == DecisionKind::Unknown) j["unknown_index"] = d.unknown_index;
  return j;
}

template <typename T>
T require(const json& j, const char* key, const char* where) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(ErrorCode::SchemaViolation, std::string("missing '") + key + "' in " + where);
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::SchemaViolation, std::string("wrong type for '") + key + "' in " + where);
  }
}

IdentityDecision decision_from_json(const json& j) {
  IdentityDecision d;
  d.kind = decision_kind_from_string(require<std::string>(j, "kind", "decision"));
  const json scores = j.contains("scores") ? j.at("scores") : json::object();
  if (!scores.is_object()) throw Error(ErrorCode::SchemaViolation, "decision scores must be an object");
  for (const auto& [id, s] : scores.items()) {
    if (!s.is_number()) throw Error(ErrorCode::SchemaViolation, "score must be a number");
    d.scores[id] = s.get<double>();
  }
  if (d.kind == DecisionKind::Known) {
    d.speaker_id = require<std::string>(j, "speaker_id", "decision");
    const auto it = d.scores.find(d.speaker_id);
    d.score = it == d.scores.end() ? 0.0 : it->second;
  }
  if (d.kind == DecisionKind::Unknown) d.unknown_index = require<int>(j, "unknown_index", "decision");
  return d;
}

}  // namespace

std::vector<AsrSegment> mock_transcribe(const AudioBuffer& /*buf*/, const std::vector<TimeInterval>& speech,
                                        const std::optional<std::vector<SidecarLine>>& sidecar) {
  std::vector<AsrSegment> out;
  if (sidecar) {
    for (const auto& line : *sidecar) {
      const bool heard = std::any_of(speech.begin(), speech.end(),
                                     [&](const TimeInterval& s) { return overlap(s, line.interval) > 0.0; });
      if (heard) out.push_back({line.interval, line.text, {}});
    }
    return out;
  }
  long counter = 0;
  for (const auto& iv : speech) {
    const long n = std::max(1L, std::lround(kTokensPerSecond * iv.length()));
    AsrSegment seg{iv, "", {}};
    const double step = iv.length() / static_cast<double>(n);
    for (long i = 0; i < n; ++i) {
      const double a = iv.start_s + step * static_cast<double>(i);
      const double b = i + 1 == n ? iv.end_s : iv.start_s + step * static_cast<double>(i + 1);
      seg.words.push_back({"w" + std::to_string(++counter), {a, b}});
    }
    seg.text = join_words(seg.words, 0, seg.words.size());
    out.push_back(std::move(seg));
  }
  return out;
}

std::vector<AsrSegment> MockAsrEngine::transcribe(const AudioBuffer& buf,
                                                  const std::vector<TimeInterval>& speech) const {
  return mock_transcribe(buf, speech, sidecar_);
}

std::vector<SidecarLine> parse_sidecar(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("sidecar is not JSON: ") + e.what());
  }
  if (!j.is_array()) throw Error(ErrorCode::SchemaViolation, "sidecar must be an array");
  std::vector<SidecarLine> out;
  for (const auto& line : j) {
    SidecarLine l{{require<double>(line, "start_s", "sidecar line"), require<double>(line, "end_s", "sidecar line")},
                  require<std::string>(line, "text", "sidecar line")};
    if (l.interval.end_s <= l.interval.start_s) throw Error(ErrorCode::SchemaViolation, "sidecar line ends before it starts");
    out.push_back(std::move(l));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const SidecarLine& a, const SidecarLine& b) { return a.interval.start_s < b.interval.start_s; });
  return out;
}

std::unique_ptr<AsrEngine> make_asr_engine(const std::string& engine_id,
                                           std::optional<std::vector<SidecarLine>> sidecar) {
  if (engine_id == MockAsrEngine::kId) return std::make_unique<MockAsrEngine>(std::move(sidecar));
  throw Error(ErrorCode::NotFound, "unknown ASR engine '" + engine_id + "'");
}

std::vector<AttributedSegment> attribute(const std::vector<AsrSegment>& asr,
                                         const LabeledDiarization& labeled) {
  std::vector<AttributedSegment> out;
  const auto& segs = labeled.segments;
  for (const auto& a : asr) {
    if (segs.empty()) {
      out.push_back({a.interval, "Speaker1", a.text, "", {}});
      continue;
    }
    std::vector<std::string> labels_touched;
    for (const auto& s : segs) {
      if (overlap(a.interval, s.interval) > 0.0 &&
          std::find(labels_touched.begin(), labels_touched.end(), s.label) == labels_touched.end()) {
        labels_touched.push_back(s.label);
      }
    }
    if (labels_touched.size() < 2 || a.words.empty()) {
      out.push_back(from_labeled(a.interval, a.text, segs[best_segment(a.interval, segs)]));
      continue;
    }

    // Split at speaker boundaries: consecutive words sharing a label form a group.
    std::vector<std::size_t> owner;
    for (const auto& w : a.words) owner.push_back(best_segment(w.interval, segs));
    std::size_t g_begin = 0;
    double g_start = a.interval.start_s;
    for (std::size_t i = 1; i <= a.words.size(); ++i) {
      if (i < a.words.size() && segs[owner[i]].label == segs[owner[g_begin]].label) continue;
      double g_end = a.interval.end_s;
      if (i < a.words.size()) {
        const double boundary = segs[owner[i]].interval.start_s;
        g_end = std::clamp(boundary, a.words[i - 1].interval.end_s, a.words[i].interval.start_s);
      }
      out.push_back(from_labeled({g_start, g_end}, join_words(a.words, g_begin, i), segs[owner[g_begin]]));
      g_begin = i;
      g_start = g_end;
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const AttributedSegment& x, const AttributedSegment& y) {
    return x.interval.start_s < y.interval.start_s;
  });
  return out;
}

std::string format_srt_timestamp(double seconds) {
  const long long total_ms = std::llround(std::max(0.0, seconds) * 1000.0);
  const long long ms = total_ms % 1000;
  const long long s = (total_ms / 1000) % 60;
  const long long m = (total_ms / 60000) % 60;
  const long long h = total_ms / 3600000;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld,%03lld", h, m, s, ms);
  return buf;
}

std::string export_srt(const TranscriptDocument& doc) {
  std::string out;
  for (std::size_t i = 0; i < doc.segments.size(); ++i) {
    const auto& seg = doc.segments[i];
    if (i > 0) out += '\n';
    out += std::to_string(i + 1) + '\n';
    out += format_srt_timestamp(seg.interval.start_s) + " --> " + format_srt_timestamp(seg.interval.end_s) + '\n';
    out += "[" + seg.speaker_label + "] " + seg.text + '\n';
  }
  return out;
}

std::string export_json(const TranscriptDocument& doc) {
  json segs = json::array();
  for (const auto& s : doc.segments) {
    segs.push_back({{"start_s", s.interval.start_s},
                    {"end_s", s.interval.end_s},
                    {"speaker", s.speaker_label},
                    {"text", s.text},
                    {"cluster", s.cluster},
                    {"decision", decision_to_json(s.decision)}});
  }
  const json j{{"media_id", doc.media_id},
               {"duration_s", doc.duration_s},
               {"setup_id", doc.setup_id},
               {"revision", doc.revision},
               {"segments", std::move(segs)}};
  return j.dump(2) + "\n";
}

TranscriptDocument import_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("not JSON: ") + e.what());
  }
  TranscriptDocument doc;
  doc.media_id = require<std::string>(j, "media_id", "document");
  doc.duration_s = require<double>(j, "duration_s", "document");
  doc.setup_id = require<std::string>(j, "setup_id", "document");
  doc.revision = require<long>(j, "revision", "document");
  const json segs = require<json>(j, "segments", "document");
  if (!segs.is_array()) throw Error(ErrorCode::SchemaViolation, "'segments' must be an array");
  for (const auto& s : segs) {
    AttributedSegment a;
    a.interval = {require<double>(s, "start_s", "segment"), require<double>(s, "end_s", "segment")};
    a.speaker_label = require<std::string>(s, "speaker", "segment");
    a.text = require<std::string>(s, "text", "segment");
    a.cluster = s.contains("cluster") ? require<std::string>(s, "cluster", "segment") : "";
    if (s.contains("decision")) a.decision = decision_from_json(s.at("decision"));
    doc.segments.push_back(std::move(a));
  }
  return doc;
}

TranscriptDocument apply_edit(const TranscriptDocument& doc, const TranscriptEdit& edit) {
  if (edit.expected_revision != doc.revision) {
    throw Error(ErrorCode::RevisionConflict, "expected revision " + std::to_string(edit.expected_revision) +
                                                 ", document is at " + std::to_string(doc.revision));
  }
  if (edit.segment_index >= doc.segments.size()) {
    throw Error(ErrorCode::IndexOutOfRange, "segment " + std::to_string(edit.segment_index) + " of " +
                                                std::to_string(doc.segments.size()));
  }
  if (edit.new_label && edit.new_label->empty()) {
    throw Error(ErrorCode::InvalidArgument, "speaker label cannot be empty");
  }
  TranscriptDocument out = doc;
  auto& seg = out.segments[edit.segment_index];
  if (edit.new_text) seg.text = *edit.new_text;
  if (edit.new_label) seg.speaker_label = *edit.new_label;
  ++out.revision;
  return out;
}

}  // namespace sdsi
