// Offline entry point: run the pipeline on a file, enroll speakers, score
// diarization output and generate the synthetic evaluation corpus.
//
// Exit codes: 0 success, 1 processing failure, 2 usage error.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <omp.h>

#include <filesystem>
#include <iomanip>
#include <iostream>

#include "sdsi/config.hpp"
#include "sdsi/corpus.hpp"
#include "sdsi/errors.hpp"
#include "sdsi/metrics.hpp"
#include "sdsi/pipeline.hpp"
#include "sdsi/speaker_registry.hpp"
#include "sdsi/storage.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config = SDSI_DEFAULT_CONFIG;
  std::optional<std::string> data_dir;
  int threads = 0;
};

sdsi::ServiceConfig load(const Common& c) {
  sdsi::ServiceConfig cfg = sdsi::load_config(c.config);
  sdsi::apply_env_overrides(cfg);
  if (c.data_dir) cfg.data_dir = *c.data_dir;
  if (c.threads > 0) omp_set_num_threads(c.threads);
  return cfg;
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Configuration file");
  cmd->add_option("--data-dir", c.data_dir, "Speaker-set storage root");
  cmd->add_option("--threads", c.threads, "OpenMP threads (0 = runtime default)");
}

std::vector<sdsi::TimeInterval> read_overlap_map(const std::string& path) {
  const json j = json::parse(sdsi::storage::read_text(path));
  std::vector<sdsi::TimeInterval> out;
  for (const auto& iv : j) out.push_back({iv.at("start_s").get<double>(), iv.at("end_s").get<double>()});
  return out;
}

struct RunArgs {
  Common common;
  std::string input, setup, out;
  std::optional<std::string> sidecar, overlap;
};

int cmd_run(const RunArgs& a) {
  if (!fs::is_regular_file(a.input)) throw UsageError("input file not found: " + a.input);
  const sdsi::ServiceConfig cfg = load(a.common);
  const sdsi::ConfigSetup* setup = nullptr;
  try {
    setup = &sdsi::find_setup(cfg.setups, a.setup);
  } catch (const sdsi::Error& e) {
    throw UsageError(e.what());
  }

  sdsi::PipelineInputs in;
  in.media = sdsi::read_file_bytes(a.input);
  in.media_id = fs::path(a.input).stem().string();
  if (a.sidecar) in.sidecar = sdsi::parse_sidecar(sdsi::storage::read_text(*a.sidecar));
  if (a.overlap) in.overlap = read_overlap_map(*a.overlap);

  std::optional<sdsi::SpeakerSet> speakers;
  if (setup->si.enabled) {
    sdsi::SpeakerRegistry registry(fs::path(cfg.data_dir) / "speaker_sets");
    registry.ensure(setup->si.speaker_set_id, setup->backend_id);
    speakers = registry.get(setup->si.speaker_set_id);
  }
  const sdsi::PipelineResult r = sdsi::run_pipeline(*setup, in, speakers ? &*speakers : nullptr);

  fs::create_directories(a.out);
  const fs::path out(a.out);
  sdsi::storage::write_atomic(out / "result.json", sdsi::export_json(r.document));
  sdsi::storage::write_atomic(out / "result.srt", sdsi::export_srt(r.document));
  sdsi::storage::write_atomic(out / "hyp.rttm", sdsi::write_rttm(sdsi::to_rttm(r.labeled, in.media_id)));
  std::cout << "segments " << r.document.segments.size() << "\n"
            << std::fixed << std::setprecision(4) << "audio_s " << r.audio_duration_s << "\n"
            << "wall_s " << r.wall_clock_s << "\n"
            << "RTF " << r.rtf << "\n";
  return 0;
}

struct EnrollArgs {
  Common common;
  std::string set, name;
  std::vector<std::string> files;
};

int cmd_enroll(const EnrollArgs& a) {
  if (a.files.empty()) throw UsageError("enroll needs at least one WAV file");
  for (const auto& f : a.files) {
    if (!fs::is_regular_file(f)) throw UsageError("file not found: " + f);
  }
  const sdsi::ServiceConfig cfg = load(a.common);
  sdsi::SpeakerRegistry registry(fs::path(cfg.data_dir) / "speaker_sets");
  registry.ensure(a.set, sdsi::BaselineBackend::kId);
  std::vector<sdsi::AudioBuffer> utterances;
  for (const auto& f : a.files) utterances.push_back(sdsi::load_canonical(sdsi::read_file_bytes(f)));
  const sdsi::SpeakerProfile p = registry.enroll(a.set, a.name, utterances);
  std::cout << p.speaker_id << "\n";
  std::cerr << "enrolled '" << p.display_name << "' into " << a.set << " (n_utterances " << p.n_utterances << ")\n";
  return 0;
}

struct DerArgs {
  std::string ref, hyp;
  double collar = 0.25;
};

int cmd_eval_der(const DerArgs& a) {
  for (const auto& f : {a.ref, a.hyp}) {
    if (!fs::is_regular_file(f)) throw UsageError("file not found: " + f);
  }
  std::vector<std::string> warnings;
  const auto ref = sdsi::parse_rttm(sdsi::storage::read_text(a.ref), &warnings);
  const auto hyp = sdsi::parse_rttm(sdsi::storage::read_text(a.hyp), &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  const sdsi::DerBreakdown d = sdsi::compute_der(ref, hyp, a.collar);
  std::cout << std::fixed << std::setprecision(3) << "collar_s " << d.collar_s << "\n"
            << "scored_speech_s " << d.scored_speech_s << "\n"
            << "missed_s " << d.missed_s << "\n"
            << "false_alarm_s " << d.false_alarm_s << "\n"
            << "confusion_s " << d.confusion_s << "\n"
            << "DER " << d.der << "\n";
  for (const auto& [r, h] : d.mapping) std::cout << "map " << r << " -> " << h << "\n";
  return 0;
}

struct CorpusArgs {
  sdsi::CorpusOptions opts;
  std::string out;
  int enroll_clips = 2;
  double enroll_s = 4.0;
};

int cmd_gen_corpus(const CorpusArgs& a) {
  const sdsi::Corpus c = sdsi::generate_corpus(a.opts);
  const fs::path out(a.out);
  fs::create_directories(out / "enroll");
  sdsi::write_file_bytes((out / (a.opts.file_id + ".wav")).string(), sdsi::encode_wav(c.audio));
  sdsi::storage::write_atomic(out / "truth.rttm", sdsi::write_rttm(c.truth));

  json voices = json::array();
  for (std::size_t i = 0; i < c.voices.size(); ++i) {
    const auto& v = c.voices[i];
    json clips = json::array();
    for (int k = 0; k < a.enroll_clips; ++k) {
      const std::string name = v.name + "_" + std::to_string(k + 1) + ".wav";
      const std::uint64_t seed = a.opts.seed * 1000003ULL + 7919ULL * (i + 1) + static_cast<std::uint64_t>(k);
      sdsi::write_file_bytes((out / "enroll" / name).string(),
                             sdsi::encode_wav(sdsi::voice_clip(v, a.enroll_s, seed, a.opts.noise_db)));
      clips.push_back("enroll/" + name);
    }
    voices.push_back({{"name", v.name},
                      {"band_hz", {v.band_lo_hz, v.band_hi_hz}},
                      {"syllable_hz", v.syllable_hz},
                      {"enroll", clips}});
  }
  const json identities{{"file_id", a.opts.file_id}, {"seed", a.opts.seed}, {"voices", voices}};
  sdsi::storage::write_atomic(out / "identities.json", identities.dump(2) + "\n");
  if (a.opts.overlap_s > 0.0) {
    json ov = json::array();
    for (const auto& iv : c.overlaps) ov.push_back({{"start_s", iv.start_s}, {"end_s", iv.end_s}});
    sdsi::storage::write_atomic(out / "overlap.json", ov.dump(2) + "\n");
  }
  std::cout << "wrote " << c.truth.size() << " turns, " << std::fixed << std::setprecision(3)
            << c.audio.duration_s() << " s to " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint speaker diarization and identification toolkit"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Process one WAV file with a configuration setup");
  run_cmd->add_option("--input", run.input, "Input WAV")->required();
  run_cmd->add_option("--setup", run.setup, "Setup id from the catalog")->required();
  run_cmd->add_option("--out", run.out, "Output directory")->required();
  run_cmd->add_option("--sidecar", run.sidecar, "Reference transcript JSON for the mock ASR engine");
  run_cmd->add_option("--overlap", run.overlap, "Overlap map JSON used to refine speaker centroids");
  add_common(run_cmd, run.common);

  EnrollArgs enroll;
  auto* enroll_cmd = app.add_subcommand("enroll", "Enroll a speaker from one or more WAV files");
  enroll_cmd->add_option("--set", enroll.set, "Speaker set id")->required();
  enroll_cmd->add_option("--name", enroll.name, "Display name")->required();
  enroll_cmd->add_option("files", enroll.files, "Enrollment WAV files");
  add_common(enroll_cmd, enroll.common);

  DerArgs der;
  auto* der_cmd = app.add_subcommand("eval-der", "Diarization error rate of a hypothesis RTTM");
  der_cmd->add_option("--ref", der.ref, "Reference RTTM")->required();
  der_cmd->add_option("--hyp", der.hyp, "Hypothesis RTTM")->required();
  der_cmd->add_option("--collar", der.collar, "No-score collar around reference boundaries (s)");

  CorpusArgs corpus;
  auto* corpus_cmd = app.add_subcommand("gen-corpus", "Generate a synthetic multi-speaker corpus");
  corpus_cmd->add_option("--voices", corpus.opts.voices, "Number of voices (1-6)");
  corpus_cmd->add_option("--turns", corpus.opts.turns, "Turns per voice");
  corpus_cmd->add_option("--out", corpus.out, "Output directory")->required();
  corpus_cmd->add_option("--seed", corpus.opts.seed, "Generator seed");
  corpus_cmd->add_option("--overlap", corpus.opts.overlap_s, "Overlap between consecutive turns (s)");
  corpus_cmd->add_option("--noise-db", corpus.opts.noise_db, "Noise floor, dBFS RMS");
  corpus_cmd->add_option("--min-turn", corpus.opts.min_turn_s, "Shortest turn (s)");
  corpus_cmd->add_option("--max-turn", corpus.opts.max_turn_s, "Longest turn (s)");
  corpus_cmd->add_option("--enroll-clips", corpus.enroll_clips, "Held-out enrollment clips per voice");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*enroll_cmd) return cmd_enroll(enroll);
    if (*der_cmd) return cmd_eval_der(der);
    if (*corpus_cmd) return cmd_gen_corpus(corpus);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
