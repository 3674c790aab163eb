#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdsi/audio.hpp"
#include "sdsi/metrics.hpp"

namespace sdsi {

// Synthetic "voice": band-limited noise with a syllable-rate amplitude
// envelope. Distinct bands give distinct baseline embeddings.
struct Voice {
  std::string name;
  double band_lo_hz = 0.0;
  double band_hi_hz = 0.0;
  double syllable_hz = 4.0;
};

// Up to six stock voices: alice, bob, carol, dave, erin, frank.
std::vector<Voice> stock_voices(int count);

struct CorpusOptions {
  int voices = 3;
  int turns = 8;  // turns per voice
  std::uint64_t seed = 20240901;
  double min_turn_s = 1.5;
  double max_turn_s = 2.5;
  double min_pause_s = 0.5;
  double max_pause_s = 0.8;
  double overlap_s = 0.0;  // > 0: consecutive turns overlap instead of pausing
  double noise_db = -60.0;  // white noise floor, dBFS RMS
  double level_rms = 0.1;
  std::string file_id = "corpus";
};

struct Corpus {
  AudioBuffer audio;
  std::vector<RttmRecord> truth;
  std::vector<TimeInterval> overlaps;
  std::vector<Voice> voices;
};

Corpus generate_corpus(const CorpusOptions& opts);

// Clean voice signal (no noise floor) of the given length.
AudioBuffer synth_voice(const Voice& v, double duration_s, std::uint64_t seed, double level_rms = 0.1);

// Voice plus noise floor; used for enrollment clips held out from the corpus.
AudioBuffer voice_clip(const Voice& v, double duration_s, std::uint64_t seed, double noise_db = -60.0);

AudioBuffer make_tone(double freq_hz, double duration_s, double amplitude, int rate = kCanonicalRate);
AudioBuffer make_noise(double duration_s, double rms, std::uint64_t seed, int rate = kCanonicalRate);

// Adds b into a starting at offset_s; a grows as needed.
void mix_into(AudioBuffer& a, const AudioBuffer& b, double offset_s);

// Portable deterministic generator (splitmix64 with Box-Muller normals).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sdsi
