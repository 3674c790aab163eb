#include "sdsi/pipeline.hpp"

#include <chrono>

#include "sdsi/errors.hpp"
#include "sdsi/metrics.hpp"

namespace sdsi {

LabeledDiarization identify_segments(const AudioBuffer& audio, const std::vector<TimeInterval>& speech,
                                     const EmbeddingBackend& backend, const SpeakerSet& set,
                                     const IdentificationParams& params) {
  std::vector<AudioBuffer> clips;
  std::vector<TimeInterval> usable;
  for (const auto& iv : speech) {
    if (iv.length() < kMinEmbeddingDuration) continue;
    clips.push_back(slice(audio, iv));
    usable.push_back(iv);
  }
  const auto embeddings = extract_batch_parallel(backend, clips);
  LabeledDiarization out;
  int unknown = 0;
  for (std::size_t i = 0; i < usable.size(); ++i) {
    IdentityDecision d = identify(embeddings[i], set, params);
    std::string label;
    if (d.kind == DecisionKind::Unknown) {
      d.unknown_index = ++unknown;
      label = "Speaker" + std::to_string(d.unknown_index);
    } else {
      label = set.find(d.speaker_id)->display_name;
    }
    out.segments.push_back({usable[i], std::move(label), "", std::move(d)});
  }
  return out;
}

PipelineResult run_pipeline(const ConfigSetup& setup, const PipelineInputs& in, const SpeakerSet* speakers) {
  const auto t0 = std::chrono::steady_clock::now();
  const AudioBuffer audio = load_canonical(in.media);
  if (audio.empty()) throw Error(ErrorCode::EmptyInput, "media contains no samples");
  const auto backend = find_backend(setup.backend_id);
  if (setup.si.enabled) {
    if (!speakers) throw Error(ErrorCode::UnknownSpeakerSet, "setup needs speaker set '" + setup.si.speaker_set_id + "'");
    if (!speakers->backend_id.empty() && speakers->backend_id != backend->id()) {
      throw Error(ErrorCode::BackendMismatch, "speaker set backend '" + speakers->backend_id + "'");
    }
  }

  PipelineResult r;
  r.audio_duration_s = audio.duration_s();
  if (setup.preprocessing == Preprocessing::SD) {
    DiarizationOutput d = diarize(audio, *backend, setup.vad, setup.diarization);
    r.speech = vad_from_diarization(d);
    if (setup.si.enabled) {
      r.labeled = assign_labels(refine_centroids(std::move(d), in.overlap), *speakers, setup.si.params);
    } else {
      r.labeled = cluster_labels(d);
    }
  } else {
    r.speech = detect_speech(audio, setup.vad);
    if (setup.si.enabled) {
      r.labeled = identify_segments(audio, r.speech, *backend, *speakers, setup.si.params);
    } else {
      for (const auto& iv : r.speech) r.labeled.segments.push_back({iv, "Speaker1", "", {}});
    }
  }

  const auto engine = make_asr_engine(setup.asr.engine_id, in.sidecar);
  const auto asr = engine->transcribe(audio, r.speech);

  r.document.media_id = in.media_id;
  r.document.duration_s = r.audio_duration_s;
  r.document.setup_id = setup.setup_id;
  r.document.segments = attribute(asr, r.labeled);
  r.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.rtf = rtf(r.audio_duration_s, r.wall_clock_s);
  return r;
}

}  // namespace sdsi
