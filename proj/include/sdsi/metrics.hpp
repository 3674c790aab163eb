#pragma once

#include <map>
#include <string>
#include <vector>

#include "sdsi/identification.hpp"

namespace sdsi {

struct RttmRecord {
  std::string file_id;
  double onset_s = 0.0;
  double duration_s = 0.0;
  std::string speaker;

  double end_s() const { return onset_s + duration_s; }
  bool operator==(const RttmRecord&) const = default;
};

// Lines other than SPEAKER are skipped; a note is appended to `warnings` when
// given. Malformed SPEAKER lines throw ParseError naming the line number.
std::vector<RttmRecord> parse_rttm(const std::string& text, std::vector<std::string>* warnings = nullptr);
std::string write_rttm(const std::vector<RttmRecord>& records);

std::vector<RttmRecord> to_rttm(const LabeledDiarization& labeled, const std::string& file_id);

struct DerBreakdown {
  double missed_s = 0.0;
  double false_alarm_s = 0.0;
  double confusion_s = 0.0;
  double scored_speech_s = 0.0;
  double der = 0.0;
  double collar_s = 0.0;
  std::map<std::string, std::string> mapping;  // reference -> hypothesis
};

enum class MappingStrategy {
  Auto,        // exhaustive when min(#ref, #hyp) <= 8, greedy otherwise
  Exhaustive,
  Greedy,      // best-pair greedy refined by pairwise re-assignment; exact when
               // either side has at most two speakers
};

// Exact event-boundary scoring. Reference boundaries are surrounded by a
// +/- collar_s no-score zone. The reference/hypothesis speaker mapping
// maximizes matched time. When nothing is scored, der is 0 if there is no
// error and +inf otherwise.
DerBreakdown compute_der(const std::vector<RttmRecord>& ref, const std::vector<RttmRecord>& hyp,
                         double collar_s = 0.25, MappingStrategy strategy = MappingStrategy::Auto);

// Speaker assignment maximizing the summed weight of a rows x cols matrix.
// Returns column per row (-1 when unassigned).
std::vector<int> map_speakers_exhaustive(const std::vector<std::vector<double>>& weight);
std::vector<int> map_speakers_greedy(const std::vector<std::vector<double>>& weight);

// Time-weighted fraction of scored reference speech where the hypothesis
// label equals the reference speaker name. Collar as in compute_der.
double id_accuracy(const std::vector<RttmRecord>& ref, const std::vector<RttmRecord>& hyp, double collar_s = 0.0);

// Per reference speaker: correctly labeled time / scored time.
std::map<std::string, double> id_accuracy_by_speaker(const std::vector<RttmRecord>& ref,
                                                     const std::vector<RttmRecord>& hyp, double collar_s = 0.0);

// Cluster-keyed variant: ref_labels gives the true identity of each cluster.
double id_accuracy(const std::map<std::string, std::string>& ref_labels, const LabeledDiarization& hyp);

double rtf(double audio_duration_s, double wall_clock_s);

}  // namespace sdsi
