#pragma once

// Test-only helpers: scratch directories, hand-rolled WAV writers and the
// independent oracles the production code is checked against. Nothing here
// calls into the code under test except for type definitions.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "sdsi/diarization.hpp"
#include "sdsi/embedding.hpp"
#include "sdsi/identification.hpp"
#include "sdsi/metrics.hpp"
#include "sdsi/transcript.hpp"

namespace testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "sdsi") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v & 0xff));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}

// Interleaved PCM16 container written field by field.
inline std::vector<std::uint8_t> pcm16_wav(const std::vector<std::int16_t>& interleaved, int channels,
                                           int rate) {
  std::vector<std::uint8_t> b;
  const auto data_bytes = static_cast<std::uint32_t>(interleaved.size() * 2);
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  put_u32(b, 36 + data_bytes);
  b.insert(b.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(b, 16);
  put_u16(b, 1);
  put_u16(b, static_cast<std::uint16_t>(channels));
  put_u32(b, static_cast<std::uint32_t>(rate));
  put_u32(b, static_cast<std::uint32_t>(rate * channels * 2));
  put_u16(b, static_cast<std::uint16_t>(channels * 2));
  put_u16(b, 16);
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  put_u32(b, data_bytes);
  for (std::int16_t s : interleaved) put_u16(b, static_cast<std::uint16_t>(s));
  return b;
}

inline std::vector<std::uint8_t> float32_wav(const std::vector<float>& mono, int rate) {
  std::vector<std::uint8_t> b;
  const auto data_bytes = static_cast<std::uint32_t>(mono.size() * 4);
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  put_u32(b, 36 + data_bytes);
  b.insert(b.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(b, 16);
  put_u16(b, 3);
  put_u16(b, 1);
  put_u32(b, static_cast<std::uint32_t>(rate));
  put_u32(b, static_cast<std::uint32_t>(rate * 4));
  put_u16(b, 4);
  put_u16(b, 32);
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  put_u32(b, data_bytes);
  for (float f : mono) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    put_u32(b, u);
  }
  return b;
}

inline std::vector<double> random_unit(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(dim);
  double s = 0.0;
  for (auto& x : v) {
    x = n(rng);
    s += x * x;
  }
  for (auto& x : v) x /= std::sqrt(s);
  return v;
}

inline sdsi::SpeakerEmbedding embedding_of(std::vector<double> v) {
  return {std::move(v), sdsi::BaselineBackend::kId};
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct AhcInstance {
  std::vector<std::vector<double>> vectors;
  double threshold = 0.4;
  std::optional<int> k;
};

// Mix of plain random, clustered and duplicate-laden (tie-producing) inputs
// of 1..8 vectors in low dimension so that merges actually happen.
inline AhcInstance random_ahc_instance(std::mt19937_64& rng) {
  AhcInstance inst;
  std::uniform_int_distribution<int> n_d(1, 8), dim_d(2, 5), kind_d(0, 2);
  std::uniform_real_distribution<double> thr_d(0.05, 1.6), u(0.0, 1.0);
  const int n = n_d(rng);
  const auto dim = static_cast<std::size_t>(dim_d(rng));
  const int kind = kind_d(rng);
  std::vector<std::vector<double>> centres;
  for (int c = 0; c < 3; ++c) centres.push_back(random_unit(rng, dim));
  std::normal_distribution<double> jitter(0.0, 0.15);
  for (int i = 0; i < n; ++i) {
    if (kind == 0) {
      inst.vectors.push_back(random_unit(rng, dim));
    } else if (kind == 1) {
      auto v = centres[static_cast<std::size_t>(i) % 3];
      double s = 0.0;
      for (auto& x : v) {
        x += jitter(rng);
        s += x * x;
      }
      for (auto& x : v) x /= std::sqrt(s);
      inst.vectors.push_back(v);
    } else {
      // Exact copies of a few prototypes: many pairwise distances tie.
      inst.vectors.push_back(centres[static_cast<std::size_t>(rng() % 3)]);
    }
  }
  inst.threshold = thr_d(rng);
  if (u(rng) < 0.25) inst.k = std::uniform_int_distribution<int>(1, n)(rng);
  return inst;
}

namespace oracle {

// Textbook average-linkage AHC: clusters are explicit member lists and the
// linkage is recomputed from scratch as the mean pairwise distance every
// round. Ties resolve to the pair with the lexicographically smallest
// (min member, min member). Returns canonical labels numbered by first member.
inline std::vector<int> naive_ahc(const std::vector<std::vector<double>>& x, double threshold,
                                  std::optional<int> k = std::nullopt) {
  const std::size_t n = x.size();
  std::vector<std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < n; ++i) clusters.push_back({i});
  auto dist = [&](std::size_t i, std::size_t j) { return 1.0 - dot(x[i], x[j]); };
  auto linkage = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    double s = 0.0;
    for (auto i : a)
      for (auto j : b) s += dist(i, j);
    return s / static_cast<double>(a.size() * b.size());
  };
  while (clusters.size() > 1) {
    if (k && static_cast<int>(clusters.size()) <= *k) break;
    std::sort(clusters.begin(), clusters.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      for (std::size_t j = i + 1; j < clusters.size(); ++j) {
        const double l = linkage(clusters[i], clusters[j]);
        if (l < best - 1e-12) {
          best = l;
          bi = i;
          bj = j;
        }
      }
    }
    if (!k && best >= threshold) break;
    clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
    std::sort(clusters[bi].begin(), clusters[bi].end());
    clusters.erase(clusters.begin() + static_cast<long>(bj));
  }
  std::vector<int> label(n, -1);
  std::sort(clusters.begin(), clusters.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  for (std::size_t c = 0; c < clusters.size(); ++c)
    for (auto i : clusters[c]) label[i] = static_cast<int>(c);
  return label;
}

struct Decision {
  bool known = false;
  std::size_t index = 0;
  double score = 0.0;
};

// Scan every reference and keep the first strict maximum.
inline Decision brute_identify(const std::vector<double>& probe, const std::vector<std::vector<double>>& refs,
                               bool open_set, double threshold) {
  Decision d;
  if (refs.empty()) return d;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const double s = std::clamp(dot(probe, refs[i]), -1.0, 1.0);
    if (s > best) {
      best = s;
      d.index = i;
    }
  }
  d.score = best;
  d.known = !open_set || best >= threshold;
  return d;
}

// DER by dense sampling at the centre of `step`-wide cells, with an optimal
// mapping found by trying every injective assignment. Used to cross-check
// the exact event-based scorer.
inline double sampled_der(const std::vector<sdsi::RttmRecord>& ref, const std::vector<sdsi::RttmRecord>& hyp,
                          double collar, double step = 0.001) {
  double end = 0.0;
  std::vector<std::string> rs, hs;
  for (const auto& r : ref) {
    end = std::max(end, r.end_s());
    if (std::find(rs.begin(), rs.end(), r.speaker) == rs.end()) rs.push_back(r.speaker);
  }
  for (const auto& h : hyp) {
    end = std::max(end, h.end_s());
    if (std::find(hs.begin(), hs.end(), h.speaker) == hs.end()) hs.push_back(h.speaker);
  }
  std::vector<double> bounds;
  for (const auto& r : ref) {
    bounds.push_back(r.onset_s);
    bounds.push_back(r.end_s());
  }
  const auto cells = static_cast<std::size_t>(std::ceil(end / step)) + 1;
  struct Cell {
    std::vector<int> r, h;
  };
  std::vector<Cell> grid(cells);
  std::vector<bool> scored(cells, true);
  for (std::size_t c = 0; c < cells; ++c) {
    const double t = (static_cast<double>(c) + 0.5) * step;
    for (double b : bounds)
      if (collar > 0 && std::abs(t - b) < collar) scored[c] = false;
    for (std::size_t i = 0; i < ref.size(); ++i)
      if (t >= ref[i].onset_s && t < ref[i].end_s()) {
        const int id = static_cast<int>(std::find(rs.begin(), rs.end(), ref[i].speaker) - rs.begin());
        if (std::find(grid[c].r.begin(), grid[c].r.end(), id) == grid[c].r.end()) grid[c].r.push_back(id);
      }
    for (std::size_t i = 0; i < hyp.size(); ++i)
      if (t >= hyp[i].onset_s && t < hyp[i].end_s()) {
        const int id = static_cast<int>(std::find(hs.begin(), hs.end(), hyp[i].speaker) - hs.begin());
        if (std::find(grid[c].h.begin(), grid[c].h.end(), id) == grid[c].h.end()) grid[c].h.push_back(id);
      }
  }
  // Every assignment of ref speakers to distinct hyp speakers or nothing.
  std::vector<int> assign(rs.size(), -1);
  double best_err = std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (std::size_t c = 0; c < cells; ++c)
    if (scored[c]) total += static_cast<double>(grid[c].r.size()) * step;
  std::function<void(std::size_t, std::set<int>&)> rec = [&](std::size_t i, std::set<int>& used) {
    if (i == rs.size()) {
      double err = 0.0;
      for (std::size_t c = 0; c < cells; ++c) {
        if (!scored[c]) continue;
        const auto nr = grid[c].r.size(), nh = grid[c].h.size();
        std::size_t correct = 0;
        for (int r : grid[c].r)
          if (assign[static_cast<std::size_t>(r)] >= 0 &&
              std::find(grid[c].h.begin(), grid[c].h.end(), assign[static_cast<std::size_t>(r)]) != grid[c].h.end())
            ++correct;
        err += static_cast<double>(std::max(nr, nh) - correct) * step;
      }
      best_err = std::min(best_err, err);
      return;
    }
    assign[i] = -1;
    rec(i + 1, used);
    for (int h = 0; h < static_cast<int>(hs.size()); ++h) {
      if (used.count(h)) continue;
      used.insert(h);
      assign[i] = h;
      rec(i + 1, used);
      used.erase(h);
      assign[i] = -1;
    }
  };
  std::set<int> used;
  rec(0, used);
  return total > 0 ? best_err / total : 0.0;
}

}  // namespace oracle

struct SrtCue {
  int index = 0;
  double start_s = 0.0;
  double end_s = 0.0;
  std::string label;
  std::string text;
};

inline double parse_srt_time(const std::string& s) {
  int h = 0, m = 0, sec = 0, ms = 0;
  if (std::sscanf(s.c_str(), "%d:%d:%d,%d", &h, &m, &sec, &ms) != 4) throw std::runtime_error("bad time " + s);
  return h * 3600.0 + m * 60.0 + sec + ms / 1000.0;
}

// Minimal SRT reader for "[label] text" cues.
inline std::vector<SrtCue> parse_srt(const std::string& text) {
  std::vector<SrtCue> cues;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    SrtCue c;
    c.index = std::stoi(line);
    std::getline(in, line);
    const auto arrow = line.find(" --> ");
    c.start_s = parse_srt_time(line.substr(0, arrow));
    c.end_s = parse_srt_time(line.substr(arrow + 5));
    std::getline(in, line);
    const auto close = line.find("] ");
    if (line.front() != '[' || close == std::string::npos) throw std::runtime_error("bad cue " + line);
    c.label = line.substr(1, close - 1);
    c.text = line.substr(close + 2);
    cues.push_back(c);
  }
  return cues;
}

// Random RTTM records on file "f", speakers prefix0..prefix{speakers-1}.
inline std::vector<sdsi::RttmRecord> random_records(std::mt19937_64& rng, int speakers, const std::string& prefix,
                                                    double span = 30.0) {
  std::vector<sdsi::RttmRecord> out;
  std::uniform_int_distribution<int> ms(0, static_cast<int>(span * 1000));
  std::uniform_int_distribution<int> len(100, 4000);
  const int n = 2 + static_cast<int>(rng() % 10);
  for (int i = 0; i < n; ++i) {
    const double on = ms(rng) / 1000.0;
    out.push_back({"f", on, len(rng) / 1000.0, prefix + std::to_string(rng() % static_cast<unsigned>(speakers))});
  }
  return out;
}

inline std::vector<std::vector<double>> random_weights(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::vector<std::vector<double>> w(rows, std::vector<double>(cols));
  // Integer weights with frequent zeros produce ties and unmatched rows.
  std::uniform_int_distribution<int> d(-4, 10);
  for (auto& r : w)
    for (auto& x : r) x = std::max(0, d(rng));
  return w;
}

inline double value(const std::vector<std::vector<double>>& w, const std::vector<int>& cols) {
  double s = 0.0;
  for (std::size_t r = 0; r < cols.size(); ++r)
    if (cols[r] >= 0) s += w[r][static_cast<std::size_t>(cols[r])];
  return s;
}


// Fixture behind golden/three_cues.srt; the middle cue straddles the hour.
inline sdsi::TranscriptDocument three_cue_doc() {
  sdsi::TranscriptDocument doc;
  doc.media_id = "m";
  doc.duration_s = 3662.0;
  doc.setup_id = "speech-analytics";
  doc.segments = {{{1.0, 3.5}, "alice", "hello world", "C1", {}},
                  {{3599.5, 3601.25}, "Speaker1", "across the hour", "C2", {}},
                  {{3661.25, 3662.0}, "bob", "done", "C3", {}}};
  return doc;
}


}  // namespace testing
