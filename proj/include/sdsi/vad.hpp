#pragma once

#include <vector>

#include "sdsi/audio.hpp"

namespace sdsi {

struct DiarizationOutput;

struct VadParams {
  double margin_db = 9.0;
  double floor_percentile = 10.0;
  double min_speech_s = 0.3;
  double min_gap_s = 0.3;
  double pad_s = 0.05;

  void validate() const;
};

// Energy-percentile speech detector. Frames louder than the given percentile
// of the non-silent frame energies plus margin_db are speech. Short gaps are bridged
// first, then runs shorter than min_speech_s are dropped, then each interval
// is padded and clamped to the buffer.
std::vector<TimeInterval> detect_speech(const AudioBuffer& buf, const VadParams& params = {});

// Union of all speaker segments as sorted disjoint intervals.
std::vector<TimeInterval> vad_from_diarization(const DiarizationOutput& d);

// Sorted, merged union of arbitrary intervals (touching intervals join).
std::vector<TimeInterval> interval_union(std::vector<TimeInterval> ivs);

}  // namespace sdsi
