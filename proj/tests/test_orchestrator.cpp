#include <doctest.h>

#include <random>
#include <set>

#include "scenarios.hpp"
#include "sdsi/errors.hpp"
#include "support.hpp"

using namespace sdsi;
using testing::TempDir;

namespace {

const std::vector<JobState> kStates = {JobState::Submitted, JobState::Queued, JobState::Running,
                                       JobState::Completed, JobState::Failed};

OrchestratorOptions options(const std::filesystem::path& dir, int workers) {
  OrchestratorOptions o;
  o.data_dir = dir;
  o.workers = workers;
  o.catalog = load_config(SDSI_DEFAULT_CONFIG).setups;
  return o;
}

}  // namespace

TEST_CASE("job state transitions follow the lifecycle table") {
  const std::set<std::pair<JobState, JobState>> legal = {
      {JobState::Submitted, JobState::Queued},
      {JobState::Queued, JobState::Running},
      {JobState::Running, JobState::Completed},
      {JobState::Running, JobState::Failed},
  };
  for (auto from : kStates)
    for (auto to : kStates)
      CHECK_MESSAGE(is_legal_transition(from, to) == legal.contains({from, to}),
                    to_string(from) << " -> " << to_string(to));
  CHECK(is_terminal(JobState::Completed));
  CHECK(is_terminal(JobState::Failed));
  CHECK_FALSE(is_terminal(JobState::Running));
  for (auto s : kStates) CHECK(job_state_from_string(to_string(s)) == s);
  CHECK_THROWS_AS(job_state_from_string("DONE"), Error);
}

TEST_CASE("random walks over legal transitions end in a terminal state and never leave it") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    JobState s = JobState::Submitted;
    int steps = 0;
    while (!is_terminal(s)) {
      std::vector<JobState> next;
      for (auto t : kStates)
        if (is_legal_transition(s, t)) next.push_back(t);
      REQUIRE_FALSE(next.empty());
      s = next[rng() % next.size()];
      REQUIRE(++steps <= 3);
    }
    for (auto t : kStates) CHECK_FALSE(is_legal_transition(s, t));
  }
}

TEST_CASE("job json round trip") {
  Job j;
  j.job_id = "job-000007";
  j.media_id = "media-000007";
  j.setup_id = "speech-analytics";
  j.filename = "a.wav";
  j.state = JobState::Completed;
  j.seq = 7;
  j.start_seq = 3;
  j.attempts = 2;
  j.submitted_at = 1.5;
  j.started_at = 2.0;
  j.finished_at = 3.25;
  j.rtf = 0.01;
  j.audio_duration_s = 12.0;
  j.result_ref = "result.json";
  const Job back = job_from_json(job_to_json(j));
  CHECK(job_to_json(back) == job_to_json(j));
  CHECK(back.state == JobState::Completed);
  CHECK(*back.rtf == doctest::Approx(0.01));
}

TEST_CASE("submit persists a queued job and rejects bad input without side effects") {
  TempDir dir;
  SpeakerRegistry reg(dir.path() / "speaker_sets");
  Orchestrator orch(options(dir.path(), 1), reg);
  const auto media = testing::small_clip_wav();

  const std::string id = orch.submit(media, "speech-analytics", "clip.wav");
  CHECK(id == "job-000001");
  const auto job = orch.get(id);
  REQUIRE(job);
  CHECK(job->state == JobState::Queued);
  CHECK(job->attempts == 0);
  CHECK(std::filesystem::exists(dir.path() / "jobs" / id / "media.wav"));
  CHECK(job_from_json(nlohmann::json::parse(storage::read_text(dir.path() / "jobs" / id / "job.json"))).state ==
        JobState::Queued);

  try {
    orch.submit(media, "no-such-setup");
    FAIL("expected UnknownSetup");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownSetup);
  }
  const std::vector<std::uint8_t> junk = {'n', 'o', 't', ' ', 'a', ' ', 'w', 'a', 'v'};
  try {
    orch.submit(junk, "speech-analytics");
    FAIL("expected MalformedContainer");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MalformedContainer);
  }
  CHECK(orch.list().size() == 1);
  std::size_t dirs = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path() / "jobs")) ++dirs;
  CHECK(dirs == 1);
  CHECK_THROWS_AS(orch.result(id), Error);
  CHECK_FALSE(orch.get("job-999999"));
}

TEST_CASE("one worker completes jobs in submission order") {
  TempDir dir;
  SpeakerRegistry reg(dir.path() / "speaker_sets");
  std::vector<std::string> order;
  std::mutex mu;
  auto opts = options(dir.path(), 1);
  opts.on_job_start = [&](const Job& j) {
    std::lock_guard lock(mu);
    order.push_back(j.job_id);
  };
  Orchestrator orch(opts, reg);
  std::vector<std::string> submitted;
  for (int i = 0; i < 4; ++i) submitted.push_back(orch.submit(testing::small_clip_wav(i + 1), "speech-analytics"));
  orch.start();
  REQUIRE(orch.wait_idle(std::chrono::seconds(60)));
  orch.stop();
  CHECK(order == submitted);
  for (std::size_t i = 0; i < submitted.size(); ++i) {
    const auto j = orch.get(submitted[i]);
    CHECK(j->state == JobState::Completed);
    CHECK(j->start_seq == static_cast<long>(i));
    CHECK(j->attempts == 1);
    REQUIRE(j->rtf);
    CHECK(*j->rtf > 0.0);
    CHECK(*j->audio_duration_s > 0.0);
  }
  CHECK(orch.max_concurrency_observed() == 1);
}

TEST_CASE("two workers never run more than two jobs and start them in FIFO order") {
  TempDir dir;
  const auto out = testing::run_barrier_jobs(dir.path(), 2, 6);
  REQUIRE(out.idle);
  CHECK(out.max_concurrency == 2);
  CHECK(out.orchestrator_peak == 2);
  // Hook entry may interleave across workers; dequeue order is start_seq.
  CHECK(std::set<std::string>(out.started.begin(), out.started.end()) ==
        std::set<std::string>(out.submitted.begin(), out.submitted.end()));
  REQUIRE(out.final_jobs.size() == 6);
  std::set<long> start_seqs;
  for (const auto& j : out.final_jobs) {
    CHECK(j.state == JobState::Completed);
    start_seqs.insert(j.start_seq);
    // FIFO: start order equals submission order.
    CHECK(j.start_seq == j.seq - 1);
  }
  CHECK(start_seqs.size() == 6);
}

TEST_CASE("a failing stage marks the job FAILED and frees the worker") {
  TempDir dir;
  SpeakerRegistry reg(dir.path() / "speaker_sets");
  auto opts = options(dir.path(), 1);
  opts.on_job_start = [](const Job& j) {
    if (j.seq == 1) throw std::runtime_error("stage exploded");
  };
  Orchestrator orch(opts, reg);
  const auto a = orch.submit(testing::small_clip_wav(), "speech-analytics");
  const auto b = orch.submit(testing::small_clip_wav(), "speech-analytics");
  orch.start();
  REQUIRE(orch.wait_idle(std::chrono::seconds(60)));
  const auto ja = orch.get(a);
  CHECK(ja->state == JobState::Failed);
  REQUIRE(ja->error);
  CHECK(ja->error->find("stage exploded") != std::string::npos);
  CHECK(orch.get(b)->state == JobState::Completed);
  try {
    orch.result(a);
    FAIL("expected InvalidState");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidState);
  }
}

TEST_CASE("media corrupted after submission fails the job with a decode error") {
  TempDir dir;
  SpeakerRegistry reg(dir.path() / "speaker_sets");
  Orchestrator orch(options(dir.path(), 1), reg);
  const auto id = orch.submit(testing::small_clip_wav(), "speech-analytics");
  storage::write_atomic(dir.path() / "jobs" / id / "media.wav", std::string("RIFF-garbage"));
  orch.start();
  REQUIRE(orch.wait_idle(std::chrono::seconds(60)));
  const auto j = orch.get(id);
  CHECK(j->state == JobState::Failed);
  REQUIRE(j->error);
  CHECK_FALSE(j->error->empty());
}

TEST_CASE("recover_jobs re-queues interrupted jobs and leaves terminal ones alone") {
  TempDir dir;
  CHECK(recover_jobs(dir.path()) == 0);

  const auto write_job = [&](const std::string& id, JobState s) {
    Job j;
    j.job_id = id;
    j.media_id = "media-" + id.substr(4);
    j.setup_id = "speech-analytics";
    j.state = s;
    j.seq = std::stol(id.substr(4));
    const auto d = dir.path() / "jobs" / id;
    std::filesystem::create_directories(d);
    storage::write_atomic(d / "job.json", job_to_json(j).dump());
    if (s == JobState::Running) storage::write_atomic(d / "result.json", std::string("{partial"));
  };
  write_job("job-000001", JobState::Completed);
  write_job("job-000002", JobState::Running);
  write_job("job-000003", JobState::Failed);
  write_job("job-000004", JobState::Submitted);
  write_job("job-000005", JobState::Queued);
  std::filesystem::create_directories(dir.path() / "jobs" / ".tmp-job-000006");

  CHECK(recover_jobs(dir.path()) == 2);
  const auto state_of = [&](const std::string& id) {
    return job_from_json(nlohmann::json::parse(storage::read_text(dir.path() / "jobs" / id / "job.json"))).state;
  };
  CHECK(state_of("job-000001") == JobState::Completed);
  CHECK(state_of("job-000002") == JobState::Queued);
  CHECK(state_of("job-000003") == JobState::Failed);
  CHECK(state_of("job-000004") == JobState::Queued);
  CHECK(state_of("job-000005") == JobState::Queued);
  CHECK_FALSE(std::filesystem::exists(dir.path() / "jobs" / "job-000002" / "result.json"));
  CHECK_FALSE(std::filesystem::exists(dir.path() / "jobs" / ".tmp-job-000006"));
  CHECK(recover_jobs(dir.path()) == 0);
}

TEST_CASE("an abandoned running job is re-run after restart without duplicating ids") {
  TempDir dir;
  SpeakerRegistry reg(dir.path() / "speaker_sets");
  std::vector<std::string> ids;
  {
    std::mutex mu;
    std::condition_variable cv;
    bool entered = false, release = false;
    auto opts = options(dir.path(), 1);
    opts.on_job_start = [&](const Job&) {
      std::unique_lock lock(mu);
      entered = true;
      cv.notify_all();
      cv.wait(lock, [&] { return release; });
    };
    Orchestrator orch(opts, reg);
    for (int i = 0; i < 3; ++i) ids.push_back(orch.submit(testing::small_clip_wav(), "speech-analytics"));
    orch.start();
    {
      std::unique_lock lock(mu);
      cv.wait(lock, [&] { return entered; });
    }
    orch.abandon();
    {
      std::lock_guard lock(mu);
      release = true;
    }
    cv.notify_all();
  }
  // The store still says RUNNING: the outcome of the abandoned job was never recorded.
  const auto persisted =
      job_from_json(nlohmann::json::parse(storage::read_text(dir.path() / "jobs" / ids[0] / "job.json")));
  CHECK(persisted.state == JobState::Running);

  Orchestrator orch(options(dir.path(), 2), reg);
  orch.start();
  REQUIRE(orch.wait_idle(std::chrono::seconds(60)));
  const auto jobs = orch.list();
  REQUIRE(jobs.size() == 3);
  for (const auto& j : jobs) CHECK(j.state == JobState::Completed);
  CHECK(orch.get(ids[0])->attempts == 2);
  const auto fresh = orch.submit(testing::small_clip_wav(), "speech-analytics");
  CHECK(std::find(ids.begin(), ids.end(), fresh) == ids.end());
  CHECK(fresh == "job-000004");
}

TEST_CASE("a killed worker process leaves a store that restarts cleanly") {
  TempDir dir;
  const auto out = testing::kill_and_restart(dir.path(), 3);
  REQUIRE_MESSAGE(out.error.empty(), out.error);
  CHECK(out.saw_running);
  CHECK(out.state_after_recovery == "QUEUED");
  CHECK(out.idle);
  CHECK(out.ids_unique);
  CHECK(out.new_id_fresh);
  REQUIRE(out.final_jobs.size() == 4);
  for (const auto& j : out.final_jobs) CHECK(j.state == JobState::Completed);
}

TEST_CASE("a running job keeps the speaker set it started with") {
  TempDir dir;
  SpeakerRegistry reg(dir.path() / "speaker_sets");
  const auto catalog = load_config(SDSI_DEFAULT_CONFIG).setups;
  const auto& setup = find_setup(catalog, "media-monitoring");
  reg.ensure(setup.si.speaker_set_id, setup.backend_id);

  CorpusOptions co;
  co.voices = 2;
  co.turns = 3;
  co.seed = 5;
  const Corpus corpus = generate_corpus(co);
  const auto media = encode_wav(corpus.audio);

  auto opts = options(dir.path(), 1);
  opts.on_job_start = [&](const Job& j) {
    if (j.seq != 1) return;
    for (std::size_t v = 0; v < corpus.voices.size(); ++v)
      reg.enroll(setup.si.speaker_set_id, corpus.voices[v].name,
                 {voice_clip(corpus.voices[v], 4.0, 900 + v), voice_clip(corpus.voices[v], 4.0, 950 + v)});
  };
  Orchestrator orch(opts, reg);
  const auto first = orch.submit(media, "media-monitoring");
  const auto second = orch.submit(media, "media-monitoring");
  orch.start();
  REQUIRE(orch.wait_idle(std::chrono::seconds(60)));

  std::set<std::string> first_labels, second_labels;
  for (const auto& s : orch.result(first).segments) first_labels.insert(s.speaker_label);
  for (const auto& s : orch.result(second).segments) second_labels.insert(s.speaker_label);
  CHECK(first_labels == std::set<std::string>{"Speaker1", "Speaker2"});
  CHECK(second_labels == std::set<std::string>{corpus.voices[0].name, corpus.voices[1].name});
}

TEST_CASE("results and edits survive a restart") {
  TempDir dir;
  SpeakerRegistry reg(dir.path() / "speaker_sets");
  std::string id;
  TranscriptDocument edited;
  {
    Orchestrator orch(options(dir.path(), 1), reg);
    id = orch.submit(testing::small_clip_wav(), "speech-analytics");
    orch.start();
    REQUIRE(orch.wait_idle(std::chrono::seconds(60)));
    const auto doc = orch.result(id);
    REQUIRE_FALSE(doc.segments.empty());
    CHECK(doc.revision == 0);
    TranscriptEdit e;
    e.segment_index = 0;
    e.new_label = "Anchor";
    e.expected_revision = 0;
    edited = orch.apply_edit(id, e);
    CHECK(edited.revision == 1);
    try {
      orch.apply_edit(id, e);
      FAIL("expected RevisionConflict");
    } catch (const Error& err) {
      CHECK(err.code() == ErrorCode::RevisionConflict);
    }
    orch.stop();
  }
  Orchestrator orch(options(dir.path(), 1), reg);
  orch.start();
  CHECK(orch.get(id)->state == JobState::Completed);
  CHECK(orch.result(id) == edited);
  CHECK(orch.result(id).segments[0].speaker_label == "Anchor");
  CHECK(std::filesystem::exists(orch.media_path(id)));
}
