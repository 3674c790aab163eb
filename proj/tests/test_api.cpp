#include <doctest.h>
#include <httplib.h>

#include <set>
#include <thread>

#include "scenarios.hpp"
#include "schema_check.hpp"
#include "sdsi/api_server.hpp"
#include "support.hpp"

using namespace sdsi;
using nlohmann::json;

namespace {

testing::SchemaCheck& schema() {
  static testing::SchemaCheck s(SDSI_API_SCHEMA);
  return s;
}

// Orchestrator plus HTTP server on an ephemeral port, all on one data dir.
class Service {
 public:
  explicit Service(const std::filesystem::path& dir, std::function<void(const Job&)> hook = {})
      : cfg_(load_config(SDSI_DEFAULT_CONFIG)), registry_(dir / "speaker_sets") {
    cfg_.data_dir = dir.string();
    cfg_.static_dir.clear();
    OrchestratorOptions o;
    o.data_dir = dir;
    o.workers = 1;
    o.catalog = cfg_.setups;
    o.on_job_start = std::move(hook);
    orch_ = std::make_unique<Orchestrator>(o, registry_);
    orch_->start();
    server_ = std::make_unique<ApiServer>(cfg_, *orch_, registry_);
    port_ = server_->bind("127.0.0.1", 0);
    REQUIRE(port_ > 0);
    thread_ = std::thread([this] { server_->serve(); });
  }
  ~Service() {
    server_->stop();
    thread_.join();
    orch_->stop();
  }

  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(30, 0);
    return c;
  }
  Orchestrator& orch() { return *orch_; }
  SpeakerRegistry& registry() { return registry_; }

 private:
  ServiceConfig cfg_;
  SpeakerRegistry registry_;
  std::unique_ptr<Orchestrator> orch_;
  std::unique_ptr<ApiServer> server_;
  int port_ = -1;
  std::thread thread_;
};

std::string as_string(const std::vector<std::uint8_t>& b) { return {b.begin(), b.end()}; }

httplib::Result post_job(httplib::Client& c, const std::string& wav, const std::string& setup) {
  httplib::MultipartFormDataItems items = {{"file", wav, "clip.wav", "audio/wav"}, {"setup_id", setup, "", ""}};
  return c.Post("/api/jobs", items);
}

// Error bodies: valid envelope, expected code, no internals leaking through.
void check_error(const httplib::Result& r, int status, const std::string& code) {
  REQUIRE(r);
  CHECK(r->status == status);
  CHECK(schema().check("error", r->body) == "");
  const json j = json::parse(r->body);
  CHECK(j["error"]["code"] == code);
  const std::string msg = j["error"]["message"];
  CHECK(msg.find('\n') == std::string::npos);
  CHECK(msg.find("std::") == std::string::npos);
  CHECK(msg.find(".cpp") == std::string::npos);
}

json wait_done(httplib::Client& c, const std::string& id) {
  for (int i = 0; i < 600; ++i) {
    auto r = c.Get("/api/jobs/" + id);
    REQUIRE(r);
    REQUIRE(r->status == 200);
    json j = json::parse(r->body);
    if (j["state"] == "COMPLETED" || j["state"] == "FAILED") return j;
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  FAIL("job did not finish");
  return {};
}

}  // namespace

TEST_CASE("setups endpoint lists the catalog with a usable ETag") {
  testing::TempDir dir;
  Service svc(dir.path());
  auto c = svc.client();
  auto r = c.Get("/api/setups");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(schema().check("setup_list", r->body) == "");
  const json items = json::parse(r->body);
  REQUIRE(items.size() == 3);
  std::set<std::string> ids;
  for (const auto& s : items) ids.insert(s["setup_id"].get<std::string>());
  CHECK(ids == std::set<std::string>{"media-monitoring", "speech-analytics", "institutional"});
  const std::string etag = r->get_header_value("ETag");
  REQUIRE_FALSE(etag.empty());
  auto again = c.Get("/api/setups", {{"If-None-Match", etag}});
  REQUIRE(again);
  CHECK(again->status == 304);
  CHECK(again->body.empty());
  auto stale = c.Get("/api/setups", {{"If-None-Match", "\"stale\""}});
  CHECK(stale->status == 200);
}

TEST_CASE("job lifecycle over HTTP: submit, poll, result, export, media") {
  testing::TempDir dir;
  Service svc(dir.path());
  auto c = svc.client();
  const std::string wav = as_string(testing::small_clip_wav());

  auto r = post_job(c, wav, "speech-analytics");
  REQUIRE(r);
  CHECK(r->status == 202);
  CHECK(schema().check("job_accepted", r->body) == "");
  const std::string id = json::parse(r->body)["job_id"];

  const json job = wait_done(c, id);
  CHECK(schema().check("job", job.dump()) == "");
  CHECK(job["state"] == "COMPLETED");
  CHECK(job["rtf"].get<double>() > 0.0);

  auto list = c.Get("/api/jobs");
  CHECK(schema().check("job_list", list->body) == "");
  CHECK(json::parse(list->body).size() == 1);

  auto res = c.Get("/api/jobs/" + id + "/result");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(schema().check("transcript", res->body) == "");
  const TranscriptDocument doc = svc.orch().result(id);
  CHECK(res->body == export_json(doc));
  CHECK_FALSE(doc.segments.empty());

  auto srt = c.Get("/api/jobs/" + id + "/export?format=srt");
  REQUIRE(srt);
  CHECK(srt->status == 200);
  CHECK(srt->body == export_srt(doc));
  CHECK(testing::parse_srt(srt->body).size() == doc.segments.size());
  auto js = c.Get("/api/jobs/" + id + "/export?format=json");
  CHECK(js->body == export_json(doc));
  check_error(c.Get("/api/jobs/" + id + "/export?format=docx"), 400, "validation");

  auto media = c.Get("/api/jobs/" + id + "/media");
  REQUIRE(media);
  CHECK(media->status == 200);
  CHECK(media->body == wav);
  auto part = c.Get("/api/jobs/" + id + "/media", {{"Range", "bytes=44-143"}});
  REQUIRE(part);
  CHECK(part->status == 206);
  CHECK(part->body == wav.substr(44, 100));
}

TEST_CASE("submission errors map onto the closed error set") {
  testing::TempDir dir;
  Service svc(dir.path());
  auto c = svc.client();
  check_error(post_job(c, "definitely not a wav file", "speech-analytics"), 400, "malformed_media");
  check_error(post_job(c, as_string(testing::small_clip_wav()), "karaoke"), 400, "unknown_setup");
  httplib::MultipartFormDataItems no_file = {{"setup_id", "speech-analytics", "", ""}};
  check_error(c.Post("/api/jobs", no_file), 400, "validation");
  check_error(c.Get("/api/jobs/job-424242"), 404, "not_found");
  check_error(c.Get("/api/jobs/job-424242/result"), 404, "not_found");
  check_error(c.Get("/api/nothing-here"), 404, "not_found");
  CHECK(json::parse(c.Get("/api/jobs")->body).empty());
}

TEST_CASE("result of an unfinished job is a 409") {
  testing::TempDir dir;
  std::mutex mu;
  std::condition_variable cv;
  bool release = false;
  Service svc(dir.path(), [&](const Job&) {
    std::unique_lock lock(mu);
    cv.wait(lock, [&] { return release; });
  });
  auto c = svc.client();
  const std::string id = json::parse(post_job(c, as_string(testing::small_clip_wav()), "speech-analytics")->body)["job_id"];
  check_error(c.Get("/api/jobs/" + id + "/result"), 409, "validation");
  check_error(c.Get("/api/jobs/" + id + "/export?format=srt"), 409, "validation");
  {
    std::lock_guard lock(mu);
    release = true;
  }
  cv.notify_all();
  CHECK(wait_done(c, id)["state"] == "COMPLETED");
}

TEST_CASE("PATCH edits bump the revision and reject stale or bad edits") {
  testing::TempDir dir;
  Service svc(dir.path());
  auto c = svc.client();
  const std::string id = json::parse(post_job(c, as_string(testing::small_clip_wav()), "speech-analytics")->body)["job_id"];
  wait_done(c, id);
  const std::string path = "/api/jobs/" + id + "/result";

  auto ok = c.Patch(path, json{{"segment_index", 0}, {"new_label", "Host"}, {"expected_revision", 0}}.dump(),
                    "application/json");
  REQUIRE(ok);
  CHECK(ok->status == 200);
  CHECK(schema().check("transcript", ok->body) == "");
  const json doc = json::parse(ok->body);
  CHECK(doc["revision"] == 1);
  CHECK(doc["segments"][0]["speaker"] == "Host");

  check_error(c.Patch(path, json{{"segment_index", 0}, {"new_text", "x"}, {"expected_revision", 0}}.dump(),
                      "application/json"),
              409, "revision_conflict");
  check_error(c.Patch(path, json{{"segment_index", 999}, {"new_text", "x"}, {"expected_revision", 1}}.dump(),
                      "application/json"),
              400, "validation");
  check_error(c.Patch(path, json{{"segment_index", -1}, {"expected_revision", 1}}.dump(), "application/json"), 400,
              "validation");
  check_error(c.Patch(path, "{not json", "application/json"), 400, "validation");
  check_error(c.Patch(path, json{{"segment_index", 0}, {"new_label", ""}, {"expected_revision", 1}}.dump(),
                      "application/json"),
              400, "validation");
  CHECK(json::parse(c.Get(path)->body)["revision"] == 1);
}

TEST_CASE("speaker sets: create, list, enroll, delete") {
  testing::TempDir dir;
  Service svc(dir.path());
  auto c = svc.client();

  auto created = c.Post("/api/speaker-sets", json{{"set_id", "desk"}}.dump(), "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  CHECK(schema().check("speaker_set", created->body) == "");
  check_error(c.Post("/api/speaker-sets", json{{"set_id", "desk"}}.dump(), "application/json"), 400, "validation");
  check_error(c.Post("/api/speaker-sets", json{{"name", "x"}}.dump(), "application/json"), 400, "validation");

  const auto voices = stock_voices(2);
  const std::string u1 = as_string(encode_wav(voice_clip(voices[0], 4.0, 1)));
  const std::string u2 = as_string(encode_wav(voice_clip(voices[0], 4.0, 2)));
  httplib::MultipartFormDataItems items = {{"display_name", "Alice", "", ""},
                                           {"file", u1, "a1.wav", "audio/wav"},
                                           {"file", u2, "a2.wav", "audio/wav"}};
  auto enrolled = c.Post("/api/speaker-sets/desk/speakers", items);
  REQUIRE(enrolled);
  CHECK(enrolled->status == 201);
  CHECK(schema().check("speaker_profile", enrolled->body) == "");
  const json p = json::parse(enrolled->body);
  CHECK(p["n_utterances"] == 2);
  CHECK(p["display_name"] == "Alice");

  httplib::MultipartFormDataItems tiny = {{"display_name", "Bob", "", ""},
                                          {"file", as_string(encode_wav(voice_clip(voices[1], 0.05, 3))), "b.wav",
                                           "audio/wav"}};
  check_error(c.Post("/api/speaker-sets/desk/speakers", tiny), 400, "validation");
  httplib::MultipartFormDataItems bad = {{"display_name", "Bob", "", ""}, {"file", "junk", "b.wav", "audio/wav"}};
  check_error(c.Post("/api/speaker-sets/desk/speakers", bad), 400, "malformed_media");
  check_error(c.Post("/api/speaker-sets/nope/speakers", items), 404, "not_found");

  auto list = c.Get("/api/speaker-sets");
  CHECK(schema().check("speaker_set_list", list->body) == "");
  const auto desk_of = [](const json& sets) {
    for (const auto& s : sets)
      if (s["set_id"] == "desk") return s;
    return json();
  };
  CHECK(desk_of(json::parse(list->body))["profiles"].size() == 1);

  const std::string sid = p["speaker_id"];
  auto del = c.Delete("/api/speaker-sets/desk/speakers/" + sid);
  REQUIRE(del);
  CHECK(del->status == 204);
  check_error(c.Delete("/api/speaker-sets/desk/speakers/" + sid), 404, "not_found");
  CHECK(desk_of(json::parse(c.Get("/api/speaker-sets")->body))["profiles"].empty());
}

TEST_CASE("to_api_error covers every library error code") {
  const std::set<std::string> closed = {"unknown_setup", "malformed_media", "not_found",
                                        "revision_conflict", "validation", "internal"};
  for (int c = 0; c <= static_cast<int>(ErrorCode::IoError); ++c) {
    const auto code = static_cast<ErrorCode>(c);
    const ApiError e = to_api_error(Error(code, "detail"));
    CHECK_MESSAGE(closed.contains(e.code), to_string(code));
    CHECK(e.http_status >= 400);
    CHECK(e.http_status < 600);
    if (e.code == "internal") CHECK(e.message == "internal error");
  }
  CHECK(to_api_error(Error(ErrorCode::RevisionConflict, "x")).http_status == 409);
  CHECK(to_api_error(Error(ErrorCode::NotFound, "x")).http_status == 404);
}

TEST_CASE("completed results are served again after a restart") {
  testing::TempDir dir;
  std::string id, before;
  {
    Service svc(dir.path());
    auto c = svc.client();
    id = json::parse(post_job(c, as_string(testing::small_clip_wav()), "speech-analytics")->body)["job_id"];
    wait_done(c, id);
    c.Patch("/api/jobs/" + id + "/result",
            json{{"segment_index", 0}, {"new_text", "edited"}, {"expected_revision", 0}}.dump(), "application/json");
    before = c.Get("/api/jobs/" + id + "/result")->body;
  }
  Service svc(dir.path());
  auto c = svc.client();
  auto r = c.Get("/api/jobs/" + id + "/result");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(r->body == before);
  CHECK(json::parse(r->body)["segments"][0]["text"] == "edited");
}
