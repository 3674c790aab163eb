#include "sdsi/vad.hpp"

#include <algorithm>
#include <cmath>

#include "sdsi/diarization.hpp"
#include "sdsi/errors.hpp"
#include "sdsi/kernels.hpp"

namespace sdsi {
namespace {

// 10*log10(1e-10) is what an all-zero frame scores; anything within 1 dB of
// it is treated as digital silence.
constexpr double kDigitalSilenceDb = -99.0;

// Linear-interpolated percentile of an unsorted sample.
double percentile(std::vector<double> values, double pct) {
  std::sort(values.begin(), values.end());
  const double pos = pct / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

}  // namespace

void VadParams::validate() const {
  if (!(floor_percentile > 0.0 && floor_percentile < 50.0)) {
    throw Error(ErrorCode::InvalidArgument, "floor_percentile must be in (0, 50)");
  }
  if (min_speech_s < 0.0 || min_gap_s < 0.0 || pad_s < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "VAD durations must be non-negative");
  }
}

std::vector<TimeInterval> detect_speech(const AudioBuffer& buf, const VadParams& params) {
  params.validate();
  const FrameSpec spec;
  const std::vector<double> energy =
      kernels::frame_energy_db_parallel(buf.samples, buf.sample_rate_hz, spec);
  if (energy.empty()) return {};

  // Digital silence (zero padding, muted stretches) says nothing about the
  // recording's noise floor and would drag the percentile down with it.
  std::vector<double> audible;
  for (double e : energy) {
    if (e > kDigitalSilenceDb) audible.push_back(e);
  }
  if (audible.empty()) return {};
  const double threshold = percentile(std::move(audible), params.floor_percentile) + params.margin_db;
  const double hop = static_cast<double>(spec.hop_samples(buf.sample_rate_hz)) / buf.sample_rate_hz;
  const double win = static_cast<double>(spec.win_samples(buf.sample_rate_hz)) / buf.sample_rate_hz;

  // A speech run covering frames [a, b) spans [a*hop, (b-1)*hop + win).
  std::vector<TimeInterval> runs;
  std::size_t f = 0;
  while (f < energy.size()) {
    if (energy[f] <= threshold) {
      ++f;
      continue;
    }
    const std::size_t a = f;
    while (f < energy.size() && energy[f] > threshold) ++f;
    runs.push_back({static_cast<double>(a) * hop, static_cast<double>(f - 1) * hop + win});
  }

  std::vector<TimeInterval> merged;
  for (const auto& r : runs) {
    if (!merged.empty() && r.start_s - merged.back().end_s < params.min_gap_s) {
      merged.back().end_s = std::max(merged.back().end_s, r.end_s);
    } else {
      merged.push_back(r);
    }
  }

  const double duration = buf.duration_s();
  std::vector<TimeInterval> out;
  for (const auto& iv : merged) {
    if (iv.length() < params.min_speech_s) continue;
    out.push_back({std::max(0.0, iv.start_s - params.pad_s), std::min(duration, iv.end_s + params.pad_s)});
  }
  // Padding can make neighbours touch; the union keeps the output disjoint.
  return interval_union(std::move(out));
}

std::vector<TimeInterval> interval_union(std::vector<TimeInterval> ivs) {
  std::sort(ivs.begin(), ivs.end(), [](const TimeInterval& a, const TimeInterval& b) {
    return a.start_s < b.start_s || (a.start_s == b.start_s && a.end_s < b.end_s);
  });
  std::vector<TimeInterval> out;
  for (const auto& iv : ivs) {
    if (iv.end_s <= iv.start_s) continue;
    if (!out.empty() && iv.start_s <= out.back().end_s) {
      out.back().end_s = std::max(out.back().end_s, iv.end_s);
    } else {
      out.push_back(iv);
    }
  }
  return out;
}

std::vector<TimeInterval> vad_from_diarization(const DiarizationOutput& d) {
  std::vector<TimeInterval> ivs;
  ivs.reserve(d.segments.size());
  for (const auto& s : d.segments) ivs.push_back(s.interval);
  return interval_union(std::move(ivs));
}

}  // namespace sdsi
