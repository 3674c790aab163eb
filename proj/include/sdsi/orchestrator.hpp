#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <chrono>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdsi/config.hpp"
#include "sdsi/speaker_registry.hpp"
#include "sdsi/transcript.hpp"

namespace sdsi {

enum class JobState { Submitted, Queued, Running, Completed, Failed };

std::string to_string(JobState s);
JobState job_state_from_string(const std::string& s);
bool is_terminal(JobState s);

// SUBMITTED -> QUEUED -> RUNNING -> COMPLETED | FAILED. Crash recovery puts
// RUNNING back to QUEUED; that edge is not part of this relation.
bool is_legal_transition(JobState from, JobState to);

struct Job {
  std::string job_id;
  std::string media_id;
  std::string setup_id;
  std::string filename;
  JobState state = JobState::Submitted;
  long seq = 0;         // submission order
  long start_seq = -1;  // dequeue order, -1 until started
  int attempts = 0;
  double submitted_at = 0.0;
  std::optional<double> started_at;
  std::optional<double> finished_at;
  std::optional<double> rtf;
  std::optional<double> audio_duration_s;
  std::optional<std::string> error;
  std::optional<std::string> result_ref;
};

nlohmann::json job_to_json(const Job& j);
Job job_from_json(const nlohmann::json& j);

// Startup recovery on a job store: RUNNING (and half-submitted) jobs go back
// to QUEUED, terminal jobs are left alone. Returns the number re-queued.
std::size_t recover_jobs(const std::filesystem::path& data_dir);

struct OrchestratorOptions {
  std::filesystem::path data_dir;
  int workers = 2;
  std::vector<ConfigSetup> catalog;
  // Called on the worker thread once a job is RUNNING and its speaker-set
  // snapshot has been taken, before the pipeline.
  // An exception thrown here fails the job like any stage error.
  std::function<void(const Job&)> on_job_start;
};

// Job store, FIFO queue and worker pool. One directory per job under
// data_dir/jobs holds job.json, media.wav and, once completed, result.json;
// every file is replaced atomically.
class Orchestrator {
 public:
  Orchestrator(OrchestratorOptions opts, SpeakerRegistry& speakers);
  ~Orchestrator();

  Orchestrator(const Orchestrator&) = delete;
  Orchestrator& operator=(const Orchestrator&) = delete;

  // Loads the store, re-queues interrupted jobs and starts the workers.
  void start();
  // Lets running jobs finish, then joins the workers. Queued jobs stay queued.
  void stop();
  // Stops the workers without recording the outcome of running jobs, as if
  // the process had died. Test hook for crash recovery.
  void abandon();

  std::string submit(std::span<const std::uint8_t> media, const std::string& setup_id,
                     const std::string& filename = "upload.wav",
                     std::optional<std::vector<SidecarLine>> sidecar = std::nullopt);

  std::optional<Job> get(const std::string& job_id) const;
  std::vector<Job> list() const;

  // InvalidState when the job has not completed.
  TranscriptDocument result(const std::string& job_id) const;
  TranscriptDocument apply_edit(const std::string& job_id, const TranscriptEdit& edit);
  std::filesystem::path media_path(const std::string& job_id) const;

  const std::vector<ConfigSetup>& catalog() const { return opts_.catalog; }

  // Blocks until no job is queued or running, or the timeout passes.
  bool wait_idle(std::chrono::milliseconds timeout);

  int max_concurrency_observed() const;

 private:
  void load_store();
  void worker_loop();
  void run_one(const std::string& job_id);
  void transition(Job& job, JobState to);
  void persist(const Job& job) const;
  std::filesystem::path job_dir(const std::string& job_id) const;

  OrchestratorOptions opts_;
  SpeakerRegistry& speakers_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  std::map<std::string, Job> jobs_;
  std::deque<std::string> queue_;
  long next_seq_ = 1;
  long next_start_seq_ = 0;
  int running_ = 0;
  int max_running_ = 0;
  bool stopping_ = false;
  bool abandoned_ = false;
  bool started_ = false;
  std::vector<std::thread> workers_;
  std::mutex edit_mu_;
};

}  // namespace sdsi
