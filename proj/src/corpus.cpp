#include "sdsi/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sdsi/errors.hpp"
#include "sdsi/kernels.hpp"

namespace sdsi {
namespace {

constexpr int kBandpassTaps = 255;

std::vector<double> bandpass_taps(double lo_hz, double hi_hz, int rate) {
  const double fl = lo_hz / rate, fh = hi_hz / rate;
  const int c = kBandpassTaps / 2;
  std::vector<double> h(kBandpassTaps);
  for (int i = 0; i < kBandpassTaps; ++i) {
    const double n = i - c;
    auto lowpass = [n](double f) {
      return n == 0 ? 2.0 * f : std::sin(2.0 * std::numbers::pi * f * n) / (std::numbers::pi * n);
    };
    const double hamming = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (kBandpassTaps - 1));
    h[static_cast<std::size_t>(i)] = (lowpass(fh) - lowpass(fl)) * hamming;
  }
  return h;
}

double rms(const std::vector<float>& x) {
  double acc = 0.0;
  for (float v : x) acc += static_cast<double>(v) * v;
  return x.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(x.size()));
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  Rng r(seed ^ (salt * 0x9E3779B97F4A7C15ULL));
  return r.next();
}

}  // namespace

std::uint64_t Rng::next() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
  has_spare_ = true;
  return r * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<Voice> stock_voices(int count) {
  static const std::vector<Voice> kVoices = {
      {"alice", 300.0, 900.0, 4.0},    {"bob", 1500.0, 3000.0, 3.5},   {"carol", 3500.0, 5500.0, 4.5},
      {"dave", 900.0, 1500.0, 3.0},    {"erin", 5500.0, 7500.0, 5.0},  {"frank", 100.0, 400.0, 4.0},
  };
  if (count < 1 || count > static_cast<int>(kVoices.size())) {
    throw Error(ErrorCode::InvalidArgument, "voices must be between 1 and " + std::to_string(kVoices.size()));
  }
  return {kVoices.begin(), kVoices.begin() + count};
}

AudioBuffer make_tone(double freq_hz, double duration_s, double amplitude, int rate) {
  AudioBuffer b;
  b.sample_rate_hz = rate;
  b.samples.resize(static_cast<std::size_t>(std::llround(duration_s * rate)));
  for (std::size_t i = 0; i < b.samples.size(); ++i) {
    b.samples[i] = static_cast<float>(amplitude * std::sin(2.0 * std::numbers::pi * freq_hz * static_cast<double>(i) / rate));
  }
  return b;
}

AudioBuffer make_noise(double duration_s, double rms_level, std::uint64_t seed, int rate) {
  Rng rng(seed);
  AudioBuffer b;
  b.sample_rate_hz = rate;
  b.samples.resize(static_cast<std::size_t>(std::llround(duration_s * rate)));
  for (float& s : b.samples) s = static_cast<float>(rms_level * rng.normal());
  return b;
}

void mix_into(AudioBuffer& a, const AudioBuffer& b, double offset_s) {
  const auto offset = static_cast<std::size_t>(std::llround(offset_s * a.sample_rate_hz));
  if (a.samples.size() < offset + b.samples.size()) a.samples.resize(offset + b.samples.size(), 0.0F);
  for (std::size_t i = 0; i < b.samples.size(); ++i) {
    a.samples[offset + i] = std::clamp(a.samples[offset + i] + b.samples[i], -1.0F, 1.0F);
  }
}

AudioBuffer synth_voice(const Voice& v, double duration_s, std::uint64_t seed, double level_rms) {
  const int rate = kCanonicalRate;
  const AudioBuffer white = make_noise(duration_s, 1.0, seed, rate);
  const auto taps = bandpass_taps(v.band_lo_hz, v.band_hi_hz, rate);
  std::vector<float> band = kernels::fir_filter_parallel(white.samples, taps);
  Rng rng(seed ^ 0x5EEDULL);
  const double phase = rng.uniform(0.0, std::numbers::pi);
  for (std::size_t i = 0; i < band.size(); ++i) {
    const double t = static_cast<double>(i) / rate;
    band[i] = static_cast<float>(band[i] * (0.35 + 0.65 * std::abs(std::sin(std::numbers::pi * v.syllable_hz * t + phase))));
  }
  const double gain = level_rms / std::max(1e-12, rms(band));
  AudioBuffer out;
  out.sample_rate_hz = rate;
  out.samples.resize(band.size());
  for (std::size_t i = 0; i < band.size(); ++i) {
    out.samples[i] = static_cast<float>(std::clamp(band[i] * gain, -1.0, 1.0));
  }
  return out;
}

AudioBuffer voice_clip(const Voice& v, double duration_s, std::uint64_t seed, double noise_db) {
  AudioBuffer clip = make_noise(duration_s, std::pow(10.0, noise_db / 20.0), mix_seed(seed, 7));
  mix_into(clip, synth_voice(v, duration_s, seed), 0.0);
  return clip;
}

Corpus generate_corpus(const CorpusOptions& opts) {
  if (opts.turns < 1) throw Error(ErrorCode::InvalidArgument, "turns must be positive");
  if (opts.min_turn_s <= 0.0 || opts.max_turn_s < opts.min_turn_s) {
    throw Error(ErrorCode::InvalidArgument, "invalid turn length range");
  }
  if (opts.overlap_s < 0.0 || opts.overlap_s >= opts.min_turn_s) {
    throw Error(ErrorCode::InvalidArgument, "overlap must be in [0, min_turn_s)");
  }
  Corpus c;
  c.voices = stock_voices(opts.voices);
  Rng rng(opts.seed);

  std::vector<int> order;
  for (int round = 0; round < opts.turns; ++round) {
    std::vector<int> perm(static_cast<std::size_t>(opts.voices));
    for (int i = 0; i < opts.voices; ++i) perm[static_cast<std::size_t>(i)] = i;
    for (std::size_t i = perm.size(); i > 1; --i) {
      std::swap(perm[i - 1], perm[static_cast<std::size_t>(rng.next() % i)]);
    }
    if (!order.empty() && perm.size() > 1 && perm.front() == order.back()) std::swap(perm[0], perm[1]);
    order.insert(order.end(), perm.begin(), perm.end());
  }

  const double lead = 0.5;
  std::vector<std::pair<int, TimeInterval>> turns;
  double t = lead;
  for (int v : order) {
    // Millisecond grid so the truth survives the 3-decimal RTTM format.
    const double dur = std::round(rng.uniform(opts.min_turn_s, opts.max_turn_s) * 1000.0) / 1000.0;
    turns.push_back({v, {t, t + dur}});
    const double pause = std::round(rng.uniform(opts.min_pause_s, opts.max_pause_s) * 1000.0) / 1000.0;
    t = std::round((opts.overlap_s > 0.0 ? t + dur - opts.overlap_s : t + dur + pause) * 1000.0) / 1000.0;
  }
  const double total = turns.back().second.end_s + lead;

  c.audio = make_noise(total, std::pow(10.0, opts.noise_db / 20.0), mix_seed(opts.seed, 1));
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const auto& [v, iv] = turns[i];
    const Voice& voice = c.voices[static_cast<std::size_t>(v)];
    mix_into(c.audio, synth_voice(voice, iv.length(), mix_seed(opts.seed, 100 + i), opts.level_rms), iv.start_s);
    c.truth.push_back({opts.file_id, iv.start_s, iv.length(), voice.name});
    if (i > 0 && overlap(turns[i - 1].second, iv) > 0.0) {
      c.overlaps.push_back({iv.start_s, std::min(iv.end_s, turns[i - 1].second.end_s)});
    }
  }
  return c;
}

}  // namespace sdsi
