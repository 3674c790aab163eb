#include "sdsi/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "sdsi/errors.hpp"
#include "sdsi/kernels.hpp"

namespace sdsi {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> b) : bytes_(b) {}

  std::uint16_t u16(std::size_t at) const {
    need(at, 2);
    return static_cast<std::uint16_t>(bytes_[at] | (bytes_[at + 1] << 8));
  }
  std::uint32_t u32(std::size_t at) const {
    need(at, 4);
    return static_cast<std::uint32_t>(bytes_[at]) | (static_cast<std::uint32_t>(bytes_[at + 1]) << 8) |
           (static_cast<std::uint32_t>(bytes_[at + 2]) << 16) |
           (static_cast<std::uint32_t>(bytes_[at + 3]) << 24);
  }
  bool tag(std::size_t at, const char* four) const {
    need(at, 4);
    return std::memcmp(bytes_.data() + at, four, 4) == 0;
  }
  void need(std::size_t at, std::size_t n) const {
    if (at + n > bytes_.size()) throw Error(ErrorCode::MalformedContainer, "truncated WAV data");
  }
  std::size_t size() const { return bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<std::uint8_t>& out, const char* four) { out.insert(out.end(), four, four + 4); }

}  // namespace

double overlap(const TimeInterval& a, const TimeInterval& b) {
  return std::max(0.0, std::min(a.end_s, b.end_s) - std::max(a.start_s, b.start_s));
}

std::size_t FrameSpec::win_samples(int rate) const {
  return static_cast<std::size_t>(std::llround(win_s * rate));
}

std::size_t FrameSpec::hop_samples(int rate) const {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(hop_s * rate)));
}

std::size_t FrameSpec::frame_count(std::size_t n, int rate) const {
  const std::size_t win = win_samples(rate);
  if (n < win || win == 0) return 0;
  return 1 + (n - win) / hop_samples(rate);
}

AudioBuffer decode_wav(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 12 || !r.tag(0, "RIFF") || !r.tag(8, "WAVE")) {
    throw Error(ErrorCode::MalformedContainer, "missing RIFF/WAVE header");
  }
  const std::uint64_t riff_size = r.u32(4);
  if (riff_size + 8 > bytes.size() || riff_size < 4) {
    throw Error(ErrorCode::MalformedContainer, "RIFF size exceeds data");
  }
  const std::size_t end = static_cast<std::size_t>(riff_size + 8);

  std::uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t data_at = 0, data_len = 0;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= end) {
    const std::uint32_t len = r.u32(pos + 4);
    const std::size_t body = pos + 8;
    if (body + len > end) throw Error(ErrorCode::MalformedContainer, "chunk size exceeds container");
    if (r.tag(pos, "fmt ")) {
      if (len < 16) throw Error(ErrorCode::MalformedContainer, "fmt chunk too small");
      format = r.u16(body);
      channels = r.u16(body + 2);
      rate = r.u32(body + 4);
      block_align = r.u16(body + 12);
      bits = r.u16(body + 14);
      if (format == kFormatExtensible) {
        if (len < 40) throw Error(ErrorCode::MalformedContainer, "extensible fmt chunk too small");
        format = r.u16(body + 24);
      }
      have_fmt = true;
    } else if (r.tag(pos, "data")) {
      data_at = body;
      data_len = len;
      have_data = true;
    }
    pos = body + len + (len & 1U);
  }
  if (!have_fmt || !have_data) throw Error(ErrorCode::MalformedContainer, "missing fmt or data chunk");

  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool float32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !float32) {
    throw Error(ErrorCode::UnsupportedEncoding,
                "format " + std::to_string(format) + " with " + std::to_string(bits) + " bits");
  }
  if (channels < 1 || channels > 2) {
    throw Error(ErrorCode::UnsupportedEncoding, std::to_string(channels) + " channels");
  }
  if (rate == 0) throw Error(ErrorCode::MalformedContainer, "zero sample rate");
  const std::size_t bytes_per_sample = bits / 8;
  if (block_align != channels * bytes_per_sample) {
    throw Error(ErrorCode::MalformedContainer, "inconsistent block alignment");
  }

  const std::size_t frames = data_len / block_align;
  AudioBuffer buf;
  buf.sample_rate_hz = static_cast<int>(rate);
  buf.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t at = data_at + (i * channels + c) * bytes_per_sample;
      if (pcm16) {
        acc += static_cast<std::int16_t>(r.u16(at)) / 32768.0;
      } else {
        const std::uint32_t raw = r.u32(at);
        float v;
        std::memcpy(&v, &raw, sizeof v);
        if (!std::isfinite(v)) throw Error(ErrorCode::MalformedContainer, "non-finite float sample");
        acc += std::clamp(static_cast<double>(v), -1.0, 1.0);
      }
    }
    buf.samples[i] = static_cast<float>(acc / channels);
  }
  return buf;
}

std::vector<std::uint8_t> encode_wav(const AudioBuffer& buf) {
  const auto n = static_cast<std::uint32_t>(buf.samples.size());
  std::vector<std::uint8_t> out;
  out.reserve(44 + 2 * static_cast<std::size_t>(n));
  put_tag(out, "RIFF");
  put_u32(out, 36 + 2 * n);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(buf.sample_rate_hz));
  put_u32(out, static_cast<std::uint32_t>(buf.sample_rate_hz) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, 2 * n);
  for (float s : buf.samples) {
    const long v = std::clamp(std::lround(static_cast<double>(s) * 32768.0), -32768L, 32767L);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
  }
  return out;
}

AudioBuffer resample(const AudioBuffer& buf, int target_hz) {
  if (target_hz <= 0) throw Error(ErrorCode::InvalidArgument, "target rate must be positive");
  if (buf.sample_rate_hz == target_hz) return buf;
  AudioBuffer out;
  out.sample_rate_hz = target_hz;
  out.samples = kernels::resample_parallel(buf.samples, buf.sample_rate_hz, target_hz);
  for (float& s : out.samples) s = std::clamp(s, -1.0F, 1.0F);
  return out;
}

AudioBuffer load_canonical(std::span<const std::uint8_t> bytes) {
  return resample(decode_wav(bytes), kCanonicalRate);
}

FeatureMatrix log_mel(const AudioBuffer& buf, const FrameSpec& spec) {
  return kernels::log_mel_parallel(buf.samples, buf.sample_rate_hz, spec);
}

AudioBuffer slice(const AudioBuffer& buf, const TimeInterval& iv) {
  const double duration = buf.duration_s();
  if (iv.start_s < 0.0 || iv.start_s >= duration) {
    throw Error(ErrorCode::OutOfRange, "slice start outside buffer");
  }
  if (iv.end_s <= iv.start_s) throw Error(ErrorCode::OutOfRange, "empty slice");
  const double max_overshoot = FrameSpec{}.hop_s;
  if (iv.end_s > duration + max_overshoot + 1e-9) {
    throw Error(ErrorCode::OutOfRange, "slice end beyond buffer");
  }
  const auto rate = static_cast<double>(buf.sample_rate_hz);
  const auto begin = static_cast<std::size_t>(std::llround(iv.start_s * rate));
  const auto stop = std::min(buf.samples.size(), static_cast<std::size_t>(std::llround(iv.end_s * rate)));
  AudioBuffer out;
  out.sample_rate_hz = buf.sample_rate_hz;
  out.samples.assign(buf.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                     buf.samples.begin() + static_cast<std::ptrdiff_t>(std::max(begin, stop)));
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path);
}

}  // namespace sdsi
