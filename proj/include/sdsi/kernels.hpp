#pragma once

// Data-parallel inner loops of the pipeline. Each kernel has an OpenMP
// implementation used in production and a plain serial reference used by
// the tests (results must agree) and by bench_kernels.

#include <cstddef>
#include <span>
#include <vector>

#include "sdsi/audio.hpp"

namespace sdsi::kernels {

struct MelFilterbank {
  std::size_t n_fft = 0;
  std::size_t n_mels = 0;
  std::vector<double> left_hz, center_hz, right_hz;
  // n_mels x (n_fft / 2 + 1), row-major.
  std::vector<double> weights;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

std::size_t fft_size_for(std::size_t win_samples);
MelFilterbank make_mel_filterbank(int rate, std::size_t n_fft, int n_mels, double fmin_hz,
                                  double fmax_hz);

FeatureMatrix log_mel_serial(std::span<const float> samples, int rate, const FrameSpec& spec);
FeatureMatrix log_mel_parallel(std::span<const float> samples, int rate, const FrameSpec& spec);

// Per-frame energy 10*log10(mean(x^2) + 1e-10) over the FrameSpec framing.
std::vector<double> frame_energy_db_serial(std::span<const float> samples, int rate,
                                           const FrameSpec& spec);
std::vector<double> frame_energy_db_parallel(std::span<const float> samples, int rate,
                                             const FrameSpec& spec);

std::vector<float> resample_serial(std::span<const float> in, int from_hz, int to_hz);
std::vector<float> resample_parallel(std::span<const float> in, int from_hz, int to_hz);

// Linear-phase FIR applied with zero-phase alignment (output[i] is centered
// on input[i]); zero padding at the edges.
std::vector<float> fir_filter_serial(std::span<const float> in, std::span<const double> taps);
std::vector<float> fir_filter_parallel(std::span<const float> in, std::span<const double> taps);

// Row-major n x n matrix of 1 - <a_i, a_j> for unit vectors of equal length.
std::vector<double> cosine_distance_matrix_serial(const std::vector<std::vector<double>>& vecs);
std::vector<double> cosine_distance_matrix_parallel(const std::vector<std::vector<double>>& vecs);

}  // namespace sdsi::kernels
