#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sdsi {

inline constexpr int kCanonicalRate = 16000;

struct AudioBuffer {
  std::vector<float> samples;
  int sample_rate_hz = kCanonicalRate;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
  bool empty() const { return samples.empty(); }
};

struct TimeInterval {
  double start_s = 0.0;
  double end_s = 0.0;

  double length() const { return end_s - start_s; }
  bool operator==(const TimeInterval&) const = default;
};

// Overlap duration of two intervals (0 when disjoint).
double overlap(const TimeInterval& a, const TimeInterval& b);

struct FrameSpec {
  double win_s = 0.025;
  double hop_s = 0.010;
  int n_mels = 24;
  double fmin_hz = 0.0;
  double fmax_hz = 0.0;  // 0 means rate / 2
  double floor_db = -80.0;

  std::size_t win_samples(int rate) const;
  std::size_t hop_samples(int rate) const;
  // 1 + floor((n - win) / hop) for n >= win, else 0.
  std::size_t frame_count(std::size_t n, int rate) const;
};

struct FeatureMatrix {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<double> values;  // row-major, frames x bins

  double at(std::size_t frame, std::size_t bin) const { return values[frame * bins + bin]; }
  std::span<const double> row(std::size_t frame) const {
    return {values.data() + frame * bins, bins};
  }
};

// RIFF/WAVE, PCM16 or IEEE float32, one or two channels. Stereo is averaged
// to mono; the sample rate is left as found.
AudioBuffer decode_wav(std::span<const std::uint8_t> bytes);

// Mono PCM16 writer.
std::vector<std::uint8_t> encode_wav(const AudioBuffer& buf);

// Windowed-sinc resampler; identity when the rates already match.
AudioBuffer resample(const AudioBuffer& buf, int target_hz);

// decode_wav followed by resampling to the canonical rate.
AudioBuffer load_canonical(std::span<const std::uint8_t> bytes);

FeatureMatrix log_mel(const AudioBuffer& buf, const FrameSpec& spec = {});

// Sample-accurate cut. The end is clamped to the duration when it overshoots
// by at most one hop (10 ms); start beyond the duration is OutOfRange.
AudioBuffer slice(const AudioBuffer& buf, const TimeInterval& iv);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace sdsi
