#include "sdsi/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>

#include "sdsi/errors.hpp"

namespace sdsi {
namespace {

constexpr double kDegenerateNorm = 1e-8;

struct Registry {
  std::mutex mu;
  std::map<std::string, std::shared_ptr<const EmbeddingBackend>> backends{
      {BaselineBackend::kId, std::make_shared<BaselineBackend>()}};
};

Registry& registry() {
  static Registry r;
  return r;
}

void require_same_backend(const SpeakerEmbedding& a, const SpeakerEmbedding& b) {
  if (a.backend_id != b.backend_id || a.dim() != b.dim()) {
    throw Error(ErrorCode::BackendMismatch, "'" + a.backend_id + "' vs '" + b.backend_id + "'");
  }
}

}  // namespace

void normalize_in_place(std::vector<double>& v) {
  const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  if (norm < kDegenerateNorm || !std::isfinite(norm)) {
    std::fill(v.begin(), v.end(), 0.0);
    if (!v.empty()) v[0] = 1.0;
    return;
  }
  for (double& x : v) x /= norm;
}

SpeakerEmbedding BaselineBackend::extract(const AudioBuffer& input) const {
  if (input.duration_s() < kMinEmbeddingDuration) {
    throw Error(ErrorCode::TooShort, "need at least 0.2 s of audio, got " + std::to_string(input.duration_s()));
  }
  const AudioBuffer buf = resample(input, kCanonicalRate);
  const FeatureMatrix fm = log_mel(buf, spec_);
  const std::size_t bins = fm.bins;
  std::vector<double> v(2 * bins, 0.0);
  const auto frames = static_cast<double>(fm.frames);
  for (std::size_t f = 0; f < fm.frames; ++f) {
    for (std::size_t b = 0; b < bins; ++b) v[b] += fm.at(f, b);
  }
  for (std::size_t b = 0; b < bins; ++b) v[b] /= frames;
  for (std::size_t f = 0; f < fm.frames; ++f) {
    for (std::size_t b = 0; b < bins; ++b) {
      const double d = fm.at(f, b) - v[b];
      v[bins + b] += d * d;
    }
  }
  for (std::size_t b = 0; b < bins; ++b) v[bins + b] = std::sqrt(v[bins + b] / frames);

  const double global_mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  for (double& x : v) x -= global_mean;
  normalize_in_place(v);
  return {std::move(v), kId};
}

SpeakerEmbedding baseline_extract(const AudioBuffer& buf) { return BaselineBackend{}.extract(buf); }

std::shared_ptr<const EmbeddingBackend> find_backend(const std::string& id) {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  auto it = r.backends.find(id);
  if (it == r.backends.end()) throw Error(ErrorCode::NotFound, "unknown embedding backend '" + id + "'");
  return it->second;
}

void register_backend(std::shared_ptr<const EmbeddingBackend> backend) {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  r.backends[backend->id()] = std::move(backend);
}

double cosine_score(const SpeakerEmbedding& a, const SpeakerEmbedding& b) {
  require_same_backend(a, b);
  const double dot = std::inner_product(a.values.begin(), a.values.end(), b.values.begin(), 0.0);
  return std::clamp(dot, -1.0, 1.0);
}

SpeakerEmbedding mean_embedding(std::span<const SpeakerEmbedding> list) {
  if (list.empty()) throw Error(ErrorCode::EmptyInput, "no embeddings to average");
  SpeakerEmbedding out{std::vector<double>(list.front().dim(), 0.0), list.front().backend_id};
  for (const auto& e : list) {
    require_same_backend(list.front(), e);
    for (std::size_t i = 0; i < e.dim(); ++i) out.values[i] += e.values[i];
  }
  for (double& x : out.values) x /= static_cast<double>(list.size());
  const double norm = std::sqrt(std::inner_product(out.values.begin(), out.values.end(), out.values.begin(), 0.0));
  if (norm < kDegenerateNorm) throw Error(ErrorCode::DegenerateMean, "embeddings cancel out");
  for (double& x : out.values) x /= norm;
  return out;
}

std::vector<SpeakerEmbedding> extract_batch_serial(const EmbeddingBackend& backend,
                                                   std::span<const AudioBuffer> clips) {
  std::vector<SpeakerEmbedding> out;
  out.reserve(clips.size());
  for (const auto& c : clips) out.push_back(backend.extract(c));
  return out;
}

std::vector<SpeakerEmbedding> extract_batch_parallel(const EmbeddingBackend& backend,
                                                     std::span<const AudioBuffer> clips) {
  std::vector<SpeakerEmbedding> out(clips.size());
  std::vector<std::exception_ptr> errors(clips.size());
  const long n = static_cast<long>(clips.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    try {
      out[ui] = backend.extract(clips[ui]);
    } catch (...) {
      errors[ui] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace sdsi
