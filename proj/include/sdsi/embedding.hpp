#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sdsi/audio.hpp"

namespace sdsi {

struct SpeakerEmbedding {
  std::vector<double> values;
  std::string backend_id;

  std::size_t dim() const { return values.size(); }
  bool operator==(const SpeakerEmbedding&) const = default;
};

// Extractors must be stateless: extract() is called concurrently from
// several workers.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::string id() const = 0;
  virtual std::size_t dim() const = 0;
  virtual SpeakerEmbedding extract(const AudioBuffer& buf) const = 0;
};

inline constexpr double kMinEmbeddingDuration = 0.2;

// Per-bin mean and standard deviation of log-mel energies, centered and
// L2-normalized. D = 2 * n_mels.
class BaselineBackend final : public EmbeddingBackend {
 public:
  static constexpr const char* kId = "baseline-logmel-stats";

  explicit BaselineBackend(FrameSpec spec = {}) : spec_(spec) {}

  std::string id() const override { return kId; }
  std::size_t dim() const override { return 2 * static_cast<std::size_t>(spec_.n_mels); }
  SpeakerEmbedding extract(const AudioBuffer& buf) const override;

 private:
  FrameSpec spec_;
};

SpeakerEmbedding baseline_extract(const AudioBuffer& buf);

// Backends by configuration id. The baseline backend is always registered.
std::shared_ptr<const EmbeddingBackend> find_backend(const std::string& id);
void register_backend(std::shared_ptr<const EmbeddingBackend> backend);

double cosine_score(const SpeakerEmbedding& a, const SpeakerEmbedding& b);

// Component-wise mean, re-normalized. Throws EmptyInput or DegenerateMean.
SpeakerEmbedding mean_embedding(std::span<const SpeakerEmbedding> list);

// Rescales to unit norm; the zero vector maps to the first basis vector.
void normalize_in_place(std::vector<double>& v);

std::vector<SpeakerEmbedding> extract_batch_serial(const EmbeddingBackend& backend,
                                                   std::span<const AudioBuffer> clips);
std::vector<SpeakerEmbedding> extract_batch_parallel(const EmbeddingBackend& backend,
                                                     std::span<const AudioBuffer> clips);

}  // namespace sdsi
