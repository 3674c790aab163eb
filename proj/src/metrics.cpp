#include "sdsi/metrics.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <set>
#include <sstream>

#include "sdsi/errors.hpp"

namespace sdsi {
namespace {

constexpr std::size_t kExhaustiveLimit = 8;

double parse_number(const std::string& tok, int line_no) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (errno != 0 || end != tok.c_str() + tok.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": bad number '" + tok + "'");
  }
  return v;
}

// Scored timeline: the elementary intervals between consecutive event
// times, minus the collar zones. Speakers are indexed per side.
struct Timeline {
  std::vector<std::string> ref_names, hyp_names;
  struct Piece {
    double len;
    std::vector<int> ref, hyp;
  };
  std::vector<Piece> pieces;
};

int index_of(std::vector<std::string>& names, const std::string& n) {
  auto it = std::find(names.begin(), names.end(), n);
  if (it != names.end()) return static_cast<int>(it - names.begin());
  names.push_back(n);
  return static_cast<int>(names.size() - 1);
}

Timeline build_timeline(const std::vector<RttmRecord>& ref, const std::vector<RttmRecord>& hyp, double collar) {
  std::set<std::string> files;
  for (const auto& r : ref) files.insert(r.file_id);
  for (const auto& h : hyp) files.insert(h.file_id);
  if (files.size() > 1) throw Error(ErrorCode::MixedFileIds, std::to_string(files.size()) + " file ids in one call");
  if (collar < 0.0) throw Error(ErrorCode::InvalidArgument, "negative collar");

  Timeline t;
  std::vector<int> ref_idx, hyp_idx;
  for (const auto& r : ref) ref_idx.push_back(index_of(t.ref_names, r.speaker));
  for (const auto& h : hyp) hyp_idx.push_back(index_of(t.hyp_names, h.speaker));

  std::vector<TimeInterval> collars;
  std::vector<double> points;
  for (const auto& r : ref) {
    points.push_back(r.onset_s);
    points.push_back(r.end_s());
    if (collar > 0.0) {
      for (double b : {r.onset_s, r.end_s()}) {
        collars.push_back({b - collar, b + collar});
        points.push_back(b - collar);
        points.push_back(b + collar);
      }
    }
  }
  for (const auto& h : hyp) {
    points.push_back(h.onset_s);
    points.push_back(h.end_s());
  }
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());

  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const double a = points[i], b = points[i + 1];
    const double mid = 0.5 * (a + b);
    const bool excised = std::any_of(collars.begin(), collars.end(),
                                     [&](const TimeInterval& c) { return mid > c.start_s && mid < c.end_s; });
    if (excised) continue;
    Timeline::Piece p{b - a, {}, {}};
    for (std::size_t k = 0; k < ref.size(); ++k) {
      if (ref[k].onset_s <= mid && mid < ref[k].end_s()) p.ref.push_back(ref_idx[k]);
    }
    for (std::size_t k = 0; k < hyp.size(); ++k) {
      if (hyp[k].onset_s <= mid && mid < hyp[k].end_s()) p.hyp.push_back(hyp_idx[k]);
    }
    for (auto* v : {&p.ref, &p.hyp}) {
      std::sort(v->begin(), v->end());
      v->erase(std::unique(v->begin(), v->end()), v->end());
    }
    if (!p.ref.empty() || !p.hyp.empty()) t.pieces.push_back(std::move(p));
  }
  return t;
}

double assignment_value(const std::vector<std::vector<double>>& w, const std::vector<int>& cols) {
  double v = 0.0;
  for (std::size_t r = 0; r < cols.size(); ++r) {
    if (cols[r] >= 0) v += w[r][static_cast<std::size_t>(cols[r])];
  }
  return v;
}

void exhaustive_search(const std::vector<std::vector<double>>& w, std::size_t row, std::vector<bool>& used,
                       std::vector<int>& cur, double cur_value, std::vector<int>& best, double& best_value) {
  if (row == w.size()) {
    if (cur_value > best_value) {
      best_value = cur_value;
      best = cur;
    }
    return;
  }
  const std::size_t cols = w[row].size();
  for (std::size_t c = 0; c < cols; ++c) {
    if (used[c]) continue;
    used[c] = true;
    cur[row] = static_cast<int>(c);
    exhaustive_search(w, row + 1, used, cur, cur_value + w[row][c], best, best_value);
    used[c] = false;
  }
  cur[row] = -1;
}

std::vector<std::vector<double>> transpose(const std::vector<std::vector<double>>& w, std::size_t cols) {
  std::vector<std::vector<double>> t(cols, std::vector<double>(w.size()));
  for (std::size_t r = 0; r < w.size(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) t[c][r] = w[r][c];
  }
  return t;
}

std::vector<int> invert(const std::vector<int>& cols_of_rows, std::size_t n_rows_out) {
  std::vector<int> out(n_rows_out, -1);
  for (std::size_t i = 0; i < cols_of_rows.size(); ++i) {
    if (cols_of_rows[i] >= 0) out[static_cast<std::size_t>(cols_of_rows[i])] = static_cast<int>(i);
  }
  return out;
}

}  // namespace

std::vector<RttmRecord> parse_rttm(const std::string& text, std::vector<std::string>* warnings) {
  std::vector<RttmRecord> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty() || tok[0].starts_with(";;")) continue;
    if (tok[0] != "SPEAKER") {
      if (warnings) warnings->push_back("line " + std::to_string(line_no) + ": skipped " + tok[0] + " record");
      continue;
    }
    if (tok.size() < 8) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected at least 8 fields");
    }
    RttmRecord r{tok[1], parse_number(tok[3], line_no), parse_number(tok[4], line_no), tok[7]};
    if (r.duration_s <= 0.0) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": non-positive duration");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string write_rttm(const std::vector<RttmRecord>& records) {
  std::string out;
  char buf[64];
  for (const auto& r : records) {
    out += "SPEAKER " + r.file_id + " 1 ";
    std::snprintf(buf, sizeof buf, "%.3f %.3f", r.onset_s, r.duration_s);
    out += buf;
    out += " <NA> <NA> " + r.speaker + " <NA> <NA>\n";
  }
  return out;
}

std::vector<RttmRecord> to_rttm(const LabeledDiarization& labeled, const std::string& file_id) {
  std::vector<RttmRecord> out;
  for (const auto& s : labeled.segments) {
    if (s.interval.length() > 0.0) out.push_back({file_id, s.interval.start_s, s.interval.length(), s.label});
  }
  return out;
}

std::vector<int> map_speakers_exhaustive(const std::vector<std::vector<double>>& weight) {
  if (weight.empty()) return {};
  const std::size_t rows = weight.size(), cols = weight.front().size();
  if (rows > cols) return invert(map_speakers_exhaustive(transpose(weight, cols)), rows);
  std::vector<bool> used(cols, false);
  std::vector<int> cur(rows, -1), best(rows, -1);
  double best_value = -1.0;
  exhaustive_search(weight, 0, used, cur, 0.0, best, best_value);
  return best;
}

std::vector<int> map_speakers_greedy(const std::vector<std::vector<double>>& weight) {
  if (weight.empty()) return {};
  const std::size_t rows = weight.size(), cols = weight.front().size();
  if (rows > cols) return invert(map_speakers_greedy(transpose(weight, cols)), rows);

  std::vector<int> col_of(rows, -1);
  std::vector<bool> col_used(cols, false);
  for (;;) {
    double best = 0.0;
    int br = -1, bc = -1;
    for (std::size_t r = 0; r < rows; ++r) {
      if (col_of[r] >= 0) continue;
      for (std::size_t c = 0; c < cols; ++c) {
        if (!col_used[c] && weight[r][c] > best) {
          best = weight[r][c];
          br = static_cast<int>(r);
          bc = static_cast<int>(c);
        }
      }
    }
    if (br < 0) break;
    col_of[static_cast<std::size_t>(br)] = bc;
    col_used[static_cast<std::size_t>(bc)] = true;
  }

  // Pairwise refinement: re-assign two rows at a time over their own columns
  // plus the free ones whenever that strictly increases the matched weight.
  // With at most two rows every row takes part, so the result is optimal.
  auto w = [&](std::size_t r, int c) { return c < 0 ? 0.0 : weight[r][static_cast<std::size_t>(c)]; };
  auto candidates = [&](int ca, int cb) {
    std::vector<int> out{-1};
    if (ca >= 0) out.push_back(ca);
    if (cb >= 0) out.push_back(cb);
    for (std::size_t c = 0; c < cols; ++c) {
      if (!col_used[c]) out.push_back(static_cast<int>(c));
    }
    return out;
  };
  auto reassign = [&](std::size_t r, int c) {
    if (col_of[r] >= 0) col_used[static_cast<std::size_t>(col_of[r])] = false;
    col_of[r] = c;
    if (c >= 0) col_used[static_cast<std::size_t>(c)] = true;
  };
  for (bool improved = true; improved;) {
    improved = false;
    for (std::size_t a = 0; a < rows; ++a) {
      for (std::size_t b = a + (rows > 1 ? 1 : 0); b < rows; ++b) {
        const bool single = a == b;
        const double current = w(a, col_of[a]) + (single ? 0.0 : w(b, col_of[b]));
        double best = current + 1e-12;
        int best_a = col_of[a], best_b = col_of[b];
        const auto cand = candidates(col_of[a], single ? -1 : col_of[b]);
        for (int ca : cand) {
          for (int cb : single ? std::vector<int>{-1} : cand) {
            if (ca >= 0 && ca == cb) continue;
            const double v = w(a, ca) + (single ? 0.0 : w(b, cb));
            if (v > best) {
              best = v;
              best_a = ca;
              best_b = cb;
            }
          }
        }
        if (best_a != col_of[a] || (!single && best_b != col_of[b])) {
          reassign(a, -1);
          if (!single) reassign(b, -1);
          reassign(a, best_a);
          if (!single) reassign(b, best_b);
          improved = true;
        }
      }
    }
  }
  return col_of;
}

DerBreakdown compute_der(const std::vector<RttmRecord>& ref, const std::vector<RttmRecord>& hyp, double collar_s,
                         MappingStrategy strategy) {
  const Timeline t = build_timeline(ref, hyp, collar_s);
  const std::size_t nr = t.ref_names.size(), nh = t.hyp_names.size();
  std::vector<std::vector<double>> matched(nr, std::vector<double>(nh, 0.0));

  DerBreakdown d;
  d.collar_s = collar_s;
  double pairable = 0.0;
  for (const auto& p : t.pieces) {
    const auto r = static_cast<double>(p.ref.size()), h = static_cast<double>(p.hyp.size());
    d.scored_speech_s += r * p.len;
    d.missed_s += std::max(0.0, r - h) * p.len;
    d.false_alarm_s += std::max(0.0, h - r) * p.len;
    pairable += std::min(r, h) * p.len;
    for (int ri : p.ref) {
      for (int hi : p.hyp) matched[static_cast<std::size_t>(ri)][static_cast<std::size_t>(hi)] += p.len;
    }
  }

  std::vector<int> cols;
  if (nr > 0 && nh > 0) {
    const bool exhaustive = strategy == MappingStrategy::Exhaustive ||
                            (strategy == MappingStrategy::Auto && std::min(nr, nh) <= kExhaustiveLimit);
    cols = exhaustive ? map_speakers_exhaustive(matched) : map_speakers_greedy(matched);
  }
  const double matched_time = assignment_value(matched, cols);
  for (std::size_t r = 0; r < cols.size(); ++r) {
    if (cols[r] >= 0) d.mapping[t.ref_names[r]] = t.hyp_names[static_cast<std::size_t>(cols[r])];
  }
  d.confusion_s = std::max(0.0, pairable - matched_time);
  const double errors = d.missed_s + d.false_alarm_s + d.confusion_s;
  if (d.scored_speech_s > 0.0) {
    d.der = errors / d.scored_speech_s;
  } else {
    d.der = errors > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  return d;
}

std::map<std::string, double> id_accuracy_by_speaker(const std::vector<RttmRecord>& ref,
                                                     const std::vector<RttmRecord>& hyp, double collar_s) {
  const Timeline t = build_timeline(ref, hyp, collar_s);
  std::vector<double> scored(t.ref_names.size(), 0.0), correct(t.ref_names.size(), 0.0);
  for (const auto& p : t.pieces) {
    for (int r : p.ref) {
      const auto ur = static_cast<std::size_t>(r);
      scored[ur] += p.len;
      const bool hit = std::any_of(p.hyp.begin(), p.hyp.end(), [&](int h) {
        return t.hyp_names[static_cast<std::size_t>(h)] == t.ref_names[ur];
      });
      if (hit) correct[ur] += p.len;
    }
  }
  std::map<std::string, double> out;
  for (std::size_t r = 0; r < t.ref_names.size(); ++r) {
    out[t.ref_names[r]] = scored[r] > 0.0 ? correct[r] / scored[r] : 0.0;
  }
  return out;
}

double id_accuracy(const std::vector<RttmRecord>& ref, const std::vector<RttmRecord>& hyp, double collar_s) {
  const Timeline t = build_timeline(ref, hyp, collar_s);
  double scored = 0.0, correct = 0.0;
  for (const auto& p : t.pieces) {
    for (int r : p.ref) {
      scored += p.len;
      const auto& name = t.ref_names[static_cast<std::size_t>(r)];
      if (std::any_of(p.hyp.begin(), p.hyp.end(),
                      [&](int h) { return t.hyp_names[static_cast<std::size_t>(h)] == name; })) {
        correct += p.len;
      }
    }
  }
  return scored > 0.0 ? correct / scored : 0.0;
}

double id_accuracy(const std::map<std::string, std::string>& ref_labels, const LabeledDiarization& hyp) {
  double scored = 0.0, correct = 0.0;
  for (const auto& s : hyp.segments) {
    const auto it = ref_labels.find(s.cluster);
    if (it == ref_labels.end()) continue;
    scored += s.interval.length();
    if (it->second == s.label) correct += s.interval.length();
  }
  return scored > 0.0 ? correct / scored : 0.0;
}

double rtf(double audio_duration_s, double wall_clock_s) {
  if (!(audio_duration_s > 0.0)) throw Error(ErrorCode::InvalidArgument, "audio duration must be positive");
  if (wall_clock_s < 0.0) throw Error(ErrorCode::InvalidArgument, "negative wall-clock time");
  return wall_clock_s / audio_duration_s;
}

}  // namespace sdsi
