#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sdsi/config.hpp"
#include "sdsi/diarization.hpp"
#include "sdsi/identification.hpp"
#include "sdsi/transcript.hpp"

namespace sdsi {

struct PipelineInputs {
  std::vector<std::uint8_t> media;  // WAV bytes as uploaded
  std::string media_id;
  std::optional<std::vector<SidecarLine>> sidecar;
  std::vector<TimeInterval> overlap;  // optional overlap map for centroid refinement
};

struct PipelineResult {
  TranscriptDocument document;
  LabeledDiarization labeled;
  std::vector<TimeInterval> speech;
  double audio_duration_s = 0.0;
  double wall_clock_s = 0.0;
  double rtf = 0.0;
};

// decode -> resample -> SD or VAD -> (SI) -> ASR -> attribution. `speakers`
// is the snapshot used for identification and must be given when the setup
// enables SI.
PipelineResult run_pipeline(const ConfigSetup& setup, const PipelineInputs& in, const SpeakerSet* speakers);

// Identification of raw speech segments (VAD-only path): each segment is
// decided on its own and unknown segments are numbered in time order.
LabeledDiarization identify_segments(const AudioBuffer& audio, const std::vector<TimeInterval>& speech,
                                     const EmbeddingBackend& backend, const SpeakerSet& set,
                                     const IdentificationParams& params);

}  // namespace sdsi
