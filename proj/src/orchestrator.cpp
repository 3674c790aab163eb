#include "sdsi/orchestrator.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "sdsi/errors.hpp"
#include "sdsi/pipeline.hpp"
#include "sdsi/storage.hpp"

namespace sdsi {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kJobFile = "job.json";
constexpr const char* kMediaFile = "media.wav";
constexpr const char* kResultFile = "result.json";
constexpr const char* kSidecarFile = "sidecar.json";
constexpr const char* kTmpPrefix = ".tmp-";

std::string numbered(const char* prefix, long n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%06ld", prefix, n);
  return buf;
}

template <typename T>
std::optional<T> optional_field(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

std::optional<Job> read_job(const fs::path& dir) {
  const fs::path file = dir / kJobFile;
  if (!fs::is_regular_file(file)) return std::nullopt;
  try {
    return job_from_json(json::parse(storage::read_text(file)));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

std::string to_string(JobState s) {
  switch (s) {
    case JobState::Submitted: return "SUBMITTED";
    case JobState::Queued: return "QUEUED";
    case JobState::Running: return "RUNNING";
    case JobState::Completed: return "COMPLETED";
    case JobState::Failed: return "FAILED";
  }
  return "FAILED";
}

JobState job_state_from_string(const std::string& s) {
  for (JobState st : {JobState::Submitted, JobState::Queued, JobState::Running, JobState::Completed, JobState::Failed}) {
    if (to_string(st) == s) return st;
  }
  throw Error(ErrorCode::SchemaViolation, "unknown job state '" + s + "'");
}

bool is_terminal(JobState s) { return s == JobState::Completed || s == JobState::Failed; }

bool is_legal_transition(JobState from, JobState to) {
  switch (from) {
    case JobState::Submitted: return to == JobState::Queued;
    case JobState::Queued: return to == JobState::Running;
    case JobState::Running: return to == JobState::Completed || to == JobState::Failed;
    case JobState::Completed:
    case JobState::Failed: return false;
  }
  return false;
}

json job_to_json(const Job& j) {
  auto opt = [](const auto& o) { return o ? json(*o) : json(nullptr); };
  return {{"job_id", j.job_id},
          {"media_id", j.media_id},
          {"setup_id", j.setup_id},
          {"filename", j.filename},
          {"state", to_string(j.state)},
          {"seq", j.seq},
          {"start_seq", j.start_seq},
          {"attempts", j.attempts},
          {"submitted_at", j.submitted_at},
          {"started_at", opt(j.started_at)},
          {"finished_at", opt(j.finished_at)},
          {"rtf", opt(j.rtf)},
          {"audio_duration_s", opt(j.audio_duration_s)},
          {"error", opt(j.error)},
          {"result_ref", opt(j.result_ref)}};
}

Job job_from_json(const json& j) {
  Job job;
  job.job_id = j.at("job_id").get<std::string>();
  job.media_id = j.at("media_id").get<std::string>();
  job.setup_id = j.at("setup_id").get<std::string>();
  job.filename = j.value("filename", std::string{});
  job.state = job_state_from_string(j.at("state").get<std::string>());
  job.seq = j.at("seq").get<long>();
  job.start_seq = j.value("start_seq", -1L);
  job.attempts = j.value("attempts", 0);
  job.submitted_at = j.value("submitted_at", 0.0);
  job.started_at = optional_field<double>(j, "started_at");
  job.finished_at = optional_field<double>(j, "finished_at");
  job.rtf = optional_field<double>(j, "rtf");
  job.audio_duration_s = optional_field<double>(j, "audio_duration_s");
  job.error = optional_field<std::string>(j, "error");
  job.result_ref = optional_field<std::string>(j, "result_ref");
  return job;
}

std::size_t recover_jobs(const fs::path& data_dir) {
  const fs::path jobs = data_dir / "jobs";
  if (!fs::is_directory(jobs)) return 0;
  std::size_t requeued = 0;
  for (const auto& entry : fs::directory_iterator(jobs)) {
    if (!entry.is_directory()) continue;
    if (entry.path().filename().string().starts_with(kTmpPrefix)) {
      fs::remove_all(entry.path());
      continue;
    }
    auto job = read_job(entry.path());
    if (!job) continue;
    if (job->state == JobState::Running || job->state == JobState::Submitted) {
      job->state = JobState::Queued;
      job->start_seq = -1;
      job->started_at.reset();
      fs::remove(entry.path() / kResultFile);
      storage::write_atomic(entry.path() / kJobFile, job_to_json(*job).dump(2));
      ++requeued;
    }
  }
  return requeued;
}

Orchestrator::Orchestrator(OrchestratorOptions opts, SpeakerRegistry& speakers)
    : opts_(std::move(opts)), speakers_(speakers) {
  if (opts_.workers < 1) throw Error(ErrorCode::ConfigError, "need at least one worker");
  fs::create_directories(opts_.data_dir / "jobs");
  for (const auto& s : opts_.catalog) {
    if (s.si.enabled) speakers_.ensure(s.si.speaker_set_id, s.backend_id);
  }
  load_store();
}

Orchestrator::~Orchestrator() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  for (auto& t : workers_) {
    if (t.joinable()) t.join();
  }
}

fs::path Orchestrator::job_dir(const std::string& job_id) const { return opts_.data_dir / "jobs" / job_id; }

void Orchestrator::load_store() {
  recover_jobs(opts_.data_dir);
  std::vector<Job> queued;
  for (const auto& entry : fs::directory_iterator(opts_.data_dir / "jobs")) {
    if (!entry.is_directory()) continue;
    auto job = read_job(entry.path());
    if (!job) continue;
    next_seq_ = std::max(next_seq_, job->seq + 1);
    if (job->state == JobState::Queued) queued.push_back(*job);
    jobs_.emplace(job->job_id, std::move(*job));
  }
  std::sort(queued.begin(), queued.end(), [](const Job& a, const Job& b) { return a.seq < b.seq; });
  for (const auto& j : queued) queue_.push_back(j.job_id);
}

void Orchestrator::start() {
  std::lock_guard lock(mu_);
  if (started_) return;
  started_ = true;
  for (int i = 0; i < opts_.workers; ++i) workers_.emplace_back([this] { worker_loop(); });
}

void Orchestrator::stop() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  for (auto& t : workers_) {
    if (t.joinable()) t.join();
  }
  workers_.clear();
}

void Orchestrator::abandon() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
    abandoned_ = true;
  }
  cv_.notify_all();
}

void Orchestrator::persist(const Job& job) const {
  storage::write_atomic(job_dir(job.job_id) / kJobFile, job_to_json(job).dump(2));
}

void Orchestrator::transition(Job& job, JobState to) {
  if (!is_legal_transition(job.state, to)) {
    throw Error(ErrorCode::InvalidState, job.job_id + ": " + to_string(job.state) + " -> " + to_string(to));
  }
  job.state = to;
}

std::string Orchestrator::submit(std::span<const std::uint8_t> media, const std::string& setup_id,
                                 const std::string& filename, std::optional<std::vector<SidecarLine>> sidecar) {
  find_setup(opts_.catalog, setup_id);
  decode_wav(media);

  Job job;
  {
    std::lock_guard lock(mu_);
    job.seq = next_seq_++;
  }
  job.job_id = numbered("job", job.seq);
  job.media_id = numbered("media", job.seq);
  job.setup_id = setup_id;
  job.filename = filename;
  job.submitted_at = storage::now_unix();

  const fs::path tmp = opts_.data_dir / "jobs" / (kTmpPrefix + job.job_id);
  fs::create_directories(tmp);
  try {
    storage::write_atomic(tmp / kMediaFile,
                          std::span<const char>(reinterpret_cast<const char*>(media.data()), media.size()));
    if (sidecar) {
      json sj = json::array();
      for (const auto& l : *sidecar) sj.push_back({{"start_s", l.interval.start_s}, {"end_s", l.interval.end_s}, {"text", l.text}});
      storage::write_atomic(tmp / kSidecarFile, sj.dump());
    }
    storage::write_atomic(tmp / kJobFile, job_to_json(job).dump(2));
    fs::rename(tmp, job_dir(job.job_id));
  } catch (...) {
    fs::remove_all(tmp);
    throw;
  }

  {
    std::lock_guard lock(mu_);
    transition(job, JobState::Queued);
    persist(job);
    jobs_[job.job_id] = job;
    queue_.push_back(job.job_id);
  }
  cv_.notify_one();
  return job.job_id;
}

std::optional<Job> Orchestrator::get(const std::string& job_id) const {
  std::lock_guard lock(mu_);
  const auto it = jobs_.find(job_id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second;
}

std::vector<Job> Orchestrator::list() const {
  std::lock_guard lock(mu_);
  std::vector<Job> out;
  for (const auto& [id, j] : jobs_) out.push_back(j);
  std::sort(out.begin(), out.end(), [](const Job& a, const Job& b) { return a.seq < b.seq; });
  return out;
}

TranscriptDocument Orchestrator::result(const std::string& job_id) const {
  const auto job = get(job_id);
  if (!job) throw Error(ErrorCode::NotFound, "no job '" + job_id + "'");
  if (job->state != JobState::Completed) {
    throw Error(ErrorCode::InvalidState, "job '" + job_id + "' is " + to_string(job->state));
  }
  return import_json(storage::read_text(job_dir(job_id) / kResultFile));
}

TranscriptDocument Orchestrator::apply_edit(const std::string& job_id, const TranscriptEdit& edit) {
  std::lock_guard lock(edit_mu_);
  TranscriptDocument updated = sdsi::apply_edit(result(job_id), edit);
  storage::write_atomic(job_dir(job_id) / kResultFile, export_json(updated));
  return updated;
}

fs::path Orchestrator::media_path(const std::string& job_id) const {
  if (!get(job_id)) throw Error(ErrorCode::NotFound, "no job '" + job_id + "'");
  return job_dir(job_id) / kMediaFile;
}

bool Orchestrator::wait_idle(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  return idle_cv_.wait_for(lock, timeout, [this] { return queue_.empty() && running_ == 0; });
}

int Orchestrator::max_concurrency_observed() const {
  std::lock_guard lock(mu_);
  return max_running_;
}

void Orchestrator::worker_loop() {
  for (;;) {
    std::string job_id;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      job_id = queue_.front();
      queue_.pop_front();
      Job& job = jobs_.at(job_id);
      transition(job, JobState::Running);
      job.start_seq = next_start_seq_++;
      job.started_at = storage::now_unix();
      ++job.attempts;
      persist(job);
      ++running_;
      max_running_ = std::max(max_running_, running_);
    }
    run_one(job_id);
    {
      std::lock_guard lock(mu_);
      --running_;
    }
    idle_cv_.notify_all();
  }
}

void Orchestrator::run_one(const std::string& job_id) {
  const Job snapshot = *get(job_id);
  const fs::path dir = job_dir(job_id);
  std::optional<std::string> failure;
  std::optional<PipelineResult> result;
  try {
    const ConfigSetup& setup = find_setup(opts_.catalog, snapshot.setup_id);
    // The job works from a copy: enrollments made while it runs do not reach it.
    std::optional<SpeakerSet> speakers;
    if (setup.si.enabled) {
      speakers = speakers_.get(setup.si.speaker_set_id);
      if (!speakers) throw Error(ErrorCode::UnknownSpeakerSet, "no speaker set '" + setup.si.speaker_set_id + "'");
    }
    if (opts_.on_job_start) opts_.on_job_start(snapshot);
    PipelineInputs in;
    in.media = read_file_bytes((dir / kMediaFile).string());
    in.media_id = snapshot.media_id;
    if (fs::is_regular_file(dir / kSidecarFile)) in.sidecar = parse_sidecar(storage::read_text(dir / kSidecarFile));
    result = run_pipeline(setup, in, speakers ? &*speakers : nullptr);
    storage::write_atomic(dir / kResultFile, export_json(result->document));
  } catch (const std::exception& e) {
    failure = e.what();
    std::error_code ec;
    fs::remove(dir / kResultFile, ec);
  } catch (...) {
    failure = "unknown failure";
  }

  std::lock_guard lock(mu_);
  if (abandoned_) return;
  Job& job = jobs_.at(job_id);
  job.finished_at = storage::now_unix();
  if (failure) {
    transition(job, JobState::Failed);
    job.error = *failure;
  } else {
    transition(job, JobState::Completed);
    job.result_ref = kResultFile;
    job.rtf = result->rtf;
    job.audio_duration_s = result->audio_duration_s;
  }
  persist(job);
}

}  // namespace sdsi
