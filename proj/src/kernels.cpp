#include "sdsi/kernels.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "sdsi/errors.hpp"

namespace sdsi::kernels {
namespace {

constexpr double kEnergyEpsilon = 1e-10;

// FFTW planning is not thread-safe; execution with the new-array interface
// is, as long as every buffer comes from fftw_malloc.
fftw_plan r2c_plan(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, fftw_plan> plans;
  std::lock_guard lock(mu);
  auto it = plans.find(n);
  if (it != plans.end()) return it->second;
  double* in = fftw_alloc_real(n);
  fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
  fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
  fftw_free(in);
  fftw_free(out);
  plans.emplace(n, plan);
  return plan;
}

struct FftScratch {
  explicit FftScratch(std::size_t n)
      : in(fftw_alloc_real(n), fftw_free), out(fftw_alloc_complex(n / 2 + 1), fftw_free) {}
  std::unique_ptr<double, decltype(&fftw_free)> in;
  std::unique_ptr<fftw_complex, decltype(&fftw_free)> out;
};

struct MelPlan {
  std::size_t win = 0;
  std::size_t hop = 0;
  std::size_t frames = 0;
  std::size_t n_fft = 0;
  std::vector<double> window;
  MelFilterbank bank;
};

MelPlan make_mel_plan(std::size_t n, int rate, const FrameSpec& spec) {
  if (spec.n_mels < 1 || spec.hop_s <= 0.0 || spec.hop_s > spec.win_s) {
    throw Error(ErrorCode::InvalidArgument, "invalid frame spec");
  }
  MelPlan p;
  p.win = spec.win_samples(rate);
  p.hop = spec.hop_samples(rate);
  p.frames = spec.frame_count(n, rate);
  p.n_fft = fft_size_for(p.win);
  p.window.resize(p.win);
  for (std::size_t i = 0; i < p.win; ++i) {
    p.window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                       static_cast<double>(p.win));
  }
  const double fmax = spec.fmax_hz > 0.0 ? spec.fmax_hz : rate / 2.0;
  p.bank = make_mel_filterbank(rate, p.n_fft, spec.n_mels, spec.fmin_hz, fmax);
  return p;
}

void mel_frame(const MelPlan& p, std::span<const float> samples, std::size_t frame,
               double floor_db, FftScratch& scratch, std::span<double> out_row) {
  double* in = scratch.in.get();
  const std::size_t offset = frame * p.hop;
  for (std::size_t i = 0; i < p.win; ++i) in[i] = samples[offset + i] * p.window[i];
  std::fill(in + p.win, in + p.n_fft, 0.0);
  fftw_execute_dft_r2c(r2c_plan(p.n_fft), in, scratch.out.get());

  const std::size_t n_bins = p.n_fft / 2 + 1;
  thread_local std::vector<double> power;
  power.resize(n_bins);
  for (std::size_t k = 0; k < n_bins; ++k) {
    const double re = scratch.out.get()[k][0];
    const double im = scratch.out.get()[k][1];
    power[k] = re * re + im * im;
  }
  for (std::size_t m = 0; m < p.bank.n_mels; ++m) {
    const double* w = p.bank.weights.data() + m * n_bins;
    double e = 0.0;
    for (std::size_t k = 0; k < n_bins; ++k) e += w[k] * power[k];
    out_row[m] = std::max(floor_db, 10.0 * std::log10(e + kEnergyEpsilon));
  }
}

double frame_energy(std::span<const float> samples, std::size_t offset, std::size_t win) {
  double acc = 0.0;
  for (std::size_t i = 0; i < win; ++i) {
    const double x = samples[offset + i];
    acc += x * x;
  }
  return 10.0 * std::log10(acc / static_cast<double>(win) + kEnergyEpsilon);
}

struct ResamplePlan {
  std::size_t out_len = 0;
  double step = 0.0;    // input samples per output sample
  double cutoff = 0.0;  // normalized to the input Nyquist
  long half_width = 0;
};

ResamplePlan make_resample_plan(std::size_t n, int from_hz, int to_hz) {
  if (from_hz <= 0 || to_hz <= 0) throw Error(ErrorCode::InvalidArgument, "rate must be positive");
  constexpr double kZeroCrossings = 16.0;
  ResamplePlan p;
  p.out_len = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * to_hz / static_cast<double>(from_hz)));
  p.step = static_cast<double>(from_hz) / to_hz;
  p.cutoff = std::min(1.0, static_cast<double>(to_hz) / from_hz) * 0.97;
  p.half_width = static_cast<long>(std::ceil(kZeroCrossings / p.cutoff));
  return p;
}

float resample_one(std::span<const float> in, const ResamplePlan& p, std::size_t n) {
  const double t = static_cast<double>(n) * p.step;
  const long center = static_cast<long>(std::floor(t));
  const long lo = std::max(0L, center - p.half_width + 1);
  const long hi = std::min(static_cast<long>(in.size()) - 1, center + p.half_width);
  double acc = 0.0;
  for (long k = lo; k <= hi; ++k) {
    const double d = t - static_cast<double>(k);
    const double u = d / static_cast<double>(p.half_width);
    if (std::abs(u) >= 1.0) continue;
    const double x = std::numbers::pi * p.cutoff * d;
    const double sinc = std::abs(x) < 1e-12 ? 1.0 : std::sin(x) / x;
    const double blackman =
        0.42 + 0.5 * std::cos(std::numbers::pi * u) + 0.08 * std::cos(2.0 * std::numbers::pi * u);
    acc += in[static_cast<std::size_t>(k)] * p.cutoff * sinc * blackman;
  }
  return static_cast<float>(acc);
}

float fir_one(std::span<const float> in, std::span<const double> taps, std::size_t i) {
  const long c = static_cast<long>(taps.size() - 1) / 2;
  const long n = static_cast<long>(in.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < taps.size(); ++j) {
    const long idx = static_cast<long>(i) + c - static_cast<long>(j);
    if (idx >= 0 && idx < n) acc += taps[j] * in[static_cast<std::size_t>(idx)];
  }
  return static_cast<float>(acc);
}

double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::LengthMismatch, "vector dimensions differ");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return std::clamp(1.0 - dot, 0.0, 2.0);
}

}  // namespace

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::size_t fft_size_for(std::size_t win_samples) {
  std::size_t n = 1;
  while (n < win_samples) n <<= 1;
  return n;
}

MelFilterbank make_mel_filterbank(int rate, std::size_t n_fft, int n_mels, double fmin_hz,
                                  double fmax_hz) {
  MelFilterbank fb;
  fb.n_fft = n_fft;
  fb.n_mels = static_cast<std::size_t>(n_mels);
  const std::size_t n_bins = n_fft / 2 + 1;
  const double mel_lo = hz_to_mel(fmin_hz);
  const double mel_hi = hz_to_mel(fmax_hz);
  std::vector<double> edges(fb.n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(fb.n_mels + 1));
  }
  fb.weights.assign(fb.n_mels * n_bins, 0.0);
  for (std::size_t m = 0; m < fb.n_mels; ++m) {
    const double l = edges[m], c = edges[m + 1], r = edges[m + 2];
    fb.left_hz.push_back(l);
    fb.center_hz.push_back(c);
    fb.right_hz.push_back(r);
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * rate / static_cast<double>(n_fft);
      double w = 0.0;
      if (f > l && f <= c) {
        w = (f - l) / (c - l);
      } else if (f > c && f < r) {
        w = (r - f) / (r - c);
      }
      fb.weights[m * n_bins + k] = w;
    }
  }
  return fb;
}

FeatureMatrix log_mel_serial(std::span<const float> samples, int rate, const FrameSpec& spec) {
  const MelPlan p = make_mel_plan(samples.size(), rate, spec);
  FeatureMatrix fm;
  fm.frames = p.frames;
  fm.bins = p.bank.n_mels;
  fm.values.resize(fm.frames * fm.bins);
  FftScratch scratch(p.n_fft);
  for (std::size_t f = 0; f < p.frames; ++f) {
    mel_frame(p, samples, f, spec.floor_db, scratch, {fm.values.data() + f * fm.bins, fm.bins});
  }
  return fm;
}

FeatureMatrix log_mel_parallel(std::span<const float> samples, int rate, const FrameSpec& spec) {
  const MelPlan p = make_mel_plan(samples.size(), rate, spec);
  FeatureMatrix fm;
  fm.frames = p.frames;
  fm.bins = p.bank.n_mels;
  fm.values.resize(fm.frames * fm.bins);
  r2c_plan(p.n_fft);
  const long frames = static_cast<long>(p.frames);
#pragma omp parallel
  {
    FftScratch scratch(p.n_fft);
#pragma omp for schedule(static)
    for (long f = 0; f < frames; ++f) {
      const auto fi = static_cast<std::size_t>(f);
      mel_frame(p, samples, fi, spec.floor_db, scratch, {fm.values.data() + fi * fm.bins, fm.bins});
    }
  }
  return fm;
}

std::vector<double> frame_energy_db_serial(std::span<const float> samples, int rate,
                                           const FrameSpec& spec) {
  const std::size_t win = spec.win_samples(rate), hop = spec.hop_samples(rate);
  std::vector<double> out(spec.frame_count(samples.size(), rate));
  for (std::size_t f = 0; f < out.size(); ++f) out[f] = frame_energy(samples, f * hop, win);
  return out;
}

std::vector<double> frame_energy_db_parallel(std::span<const float> samples, int rate,
                                             const FrameSpec& spec) {
  const std::size_t win = spec.win_samples(rate), hop = spec.hop_samples(rate);
  std::vector<double> out(spec.frame_count(samples.size(), rate));
  const long n = static_cast<long>(out.size());
#pragma omp parallel for schedule(static)
  for (long f = 0; f < n; ++f) {
    out[static_cast<std::size_t>(f)] = frame_energy(samples, static_cast<std::size_t>(f) * hop, win);
  }
  return out;
}

std::vector<float> resample_serial(std::span<const float> in, int from_hz, int to_hz) {
  const ResamplePlan p = make_resample_plan(in.size(), from_hz, to_hz);
  std::vector<float> out(p.out_len);
  for (std::size_t n = 0; n < p.out_len; ++n) out[n] = resample_one(in, p, n);
  return out;
}

std::vector<float> resample_parallel(std::span<const float> in, int from_hz, int to_hz) {
  const ResamplePlan p = make_resample_plan(in.size(), from_hz, to_hz);
  std::vector<float> out(p.out_len);
  const long n_out = static_cast<long>(p.out_len);
#pragma omp parallel for schedule(static)
  for (long n = 0; n < n_out; ++n) {
    out[static_cast<std::size_t>(n)] = resample_one(in, p, static_cast<std::size_t>(n));
  }
  return out;
}

std::vector<float> fir_filter_serial(std::span<const float> in, std::span<const double> taps) {
  std::vector<float> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fir_one(in, taps, i);
  return out;
}

std::vector<float> fir_filter_parallel(std::span<const float> in, std::span<const double> taps) {
  std::vector<float> out(in.size());
  const long n = static_cast<long>(in.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = fir_one(in, taps, static_cast<std::size_t>(i));
  }
  return out;
}

std::vector<double> cosine_distance_matrix_serial(const std::vector<std::vector<double>>& vecs) {
  const std::size_t n = vecs.size();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      d[i * n + j] = d[j * n + i] = cosine_distance(vecs[i], vecs[j]);
    }
  }
  return d;
}

std::vector<double> cosine_distance_matrix_parallel(const std::vector<std::vector<double>>& vecs) {
  for (const auto& v : vecs) {
    if (v.size() != vecs.front().size()) throw Error(ErrorCode::LengthMismatch, "vector dimensions differ");
  }
  const long n = static_cast<long>(vecs.size());
  const auto un = vecs.size();
  std::vector<double> d(un * un, 0.0);
#pragma omp parallel for schedule(dynamic, 8)
  for (long i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    for (std::size_t j = ui + 1; j < un; ++j) {
      d[ui * un + j] = d[j * un + ui] = cosine_distance(vecs[ui], vecs[j]);
    }
  }
  return d;
}

}  // namespace sdsi::kernels
