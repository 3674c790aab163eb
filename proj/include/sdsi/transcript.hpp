#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sdsi/audio.hpp"
#include "sdsi/identification.hpp"

namespace sdsi {

struct Word {
  std::string text;
  TimeInterval interval;
};

struct AsrSegment {
  TimeInterval interval;
  std::string text;
  std::vector<Word> words;  // empty when the engine gives no word timings
};

struct SidecarLine {
  TimeInterval interval;
  std::string text;
};

class AsrEngine {
 public:
  virtual ~AsrEngine() = default;
  virtual std::string id() const = 0;
  virtual std::vector<std::string> languages() const = 0;
  virtual std::vector<AsrSegment> transcribe(const AudioBuffer& buf,
                                             const std::vector<TimeInterval>& speech) const = 0;
};

// Deterministic stand-in engine. Without a sidecar it emits "w1 w2 ..." at
// three tokens per second of speech, with evenly spaced word timings.
class MockAsrEngine final : public AsrEngine {
 public:
  static constexpr const char* kId = "mock";

  explicit MockAsrEngine(std::optional<std::vector<SidecarLine>> sidecar = std::nullopt)
      : sidecar_(std::move(sidecar)) {}

  std::string id() const override { return kId; }
  std::vector<std::string> languages() const override { return {"en", "it", "de", "fr", "es"}; }
  std::vector<AsrSegment> transcribe(const AudioBuffer& buf,
                                     const std::vector<TimeInterval>& speech) const override;

 private:
  std::optional<std::vector<SidecarLine>> sidecar_;
};

std::vector<AsrSegment> mock_transcribe(const AudioBuffer& buf, const std::vector<TimeInterval>& speech,
                                        const std::optional<std::vector<SidecarLine>>& sidecar = std::nullopt);

// Sidecar document: [{"start_s":..,"end_s":..,"text":..}, ...]
std::vector<SidecarLine> parse_sidecar(const std::string& json_text);

std::unique_ptr<AsrEngine> make_asr_engine(const std::string& engine_id,
                                           std::optional<std::vector<SidecarLine>> sidecar = std::nullopt);

struct AttributedSegment {
  TimeInterval interval;
  std::string speaker_label;
  std::string text;
  std::string cluster;
  IdentityDecision decision;

  bool operator==(const AttributedSegment&) const = default;
};

struct TranscriptDocument {
  std::string media_id;
  double duration_s = 0.0;
  std::string setup_id;
  std::vector<AttributedSegment> segments;
  long revision = 0;

  bool operator==(const TranscriptDocument&) const = default;
};

std::vector<AttributedSegment> attribute(const std::vector<AsrSegment>& asr,
                                         const LabeledDiarization& labeled);

std::string export_srt(const TranscriptDocument& doc);
std::string format_srt_timestamp(double seconds);

std::string export_json(const TranscriptDocument& doc);
TranscriptDocument import_json(const std::string& text);

struct TranscriptEdit {
  std::size_t segment_index = 0;
  std::optional<std::string> new_text;
  std::optional<std::string> new_label;
  long expected_revision = 0;
};

TranscriptDocument apply_edit(const TranscriptDocument& doc, const TranscriptEdit& edit);

}  // namespace sdsi
