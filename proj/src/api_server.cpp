#include "sdsi/api_server.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>

#include "sdsi/storage.hpp"

namespace sdsi {
namespace {

using nlohmann::json;

constexpr const char* kJson = "application/json";

void send_error(httplib::Response& res, const ApiError& e) {
  res.status = e.http_status;
  res.set_content(json{{"error", {{"code", e.code}, {"message", e.message}}}}.dump(), kJson);
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

json job_view(const Job& j) {
  json v = job_to_json(j);
  v.erase("seq");
  v.erase("start_seq");
  v.erase("attempts");
  return v;
}

json profile_view(const SpeakerProfile& p) {
  return {{"speaker_id", p.speaker_id},
          {"display_name", p.display_name},
          {"n_utterances", p.n_utterances},
          {"enrolled_at", p.enrolled_at}};
}

json set_view(const SpeakerSet& s) {
  json profiles = json::array();
  for (const auto& p : s.profiles) profiles.push_back(profile_view(p));
  return {{"set_id", s.set_id}, {"backend_id", s.backend_id}, {"profiles", std::move(profiles)}};
}

std::string etag_of(const std::string& body) {
  return "\"" + std::to_string(std::hash<std::string>{}(body)) + "\"";
}

json parse_body(const httplib::Request& req) {
  try {
    json j = json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "request body must be a JSON object");
    return j;
  } catch (const json::parse_error&) {
    throw Error(ErrorCode::InvalidArgument, "request body is not valid JSON");
  }
}

std::span<const std::uint8_t> as_bytes(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace

ApiError to_api_error(const Error& e) {
  switch (e.code()) {
    case ErrorCode::UnknownSetup: return {400, "unknown_setup", e.what()};
    case ErrorCode::MalformedContainer:
    case ErrorCode::UnsupportedEncoding: return {400, "malformed_media", e.what()};
    case ErrorCode::NotFound:
    case ErrorCode::UnknownSpeakerSet: return {404, "not_found", e.what()};
    case ErrorCode::RevisionConflict: return {409, "revision_conflict", e.what()};
    case ErrorCode::InvalidState: return {409, "validation", e.what()};
    case ErrorCode::OutOfRange:
    case ErrorCode::InvalidArgument:
    case ErrorCode::TooShort:
    case ErrorCode::BackendMismatch:
    case ErrorCode::EmptyInput:
    case ErrorCode::DegenerateMean:
    case ErrorCode::LengthMismatch:
    case ErrorCode::EmptySet:
    case ErrorCode::SchemaViolation:
    case ErrorCode::IndexOutOfRange:
    case ErrorCode::ParseError:
    case ErrorCode::MixedFileIds: return {400, "validation", e.what()};
    case ErrorCode::ConfigError:
    case ErrorCode::IoError: break;
  }
  return {500, "internal", "internal error"};
}

struct ApiServer::Impl {
  Impl(const ServiceConfig& c, Orchestrator& o, SpeakerRegistry& s) : cfg(c), orch(o), speakers(s) {
    svr.set_payload_max_length(cfg.max_upload_bytes);
    svr.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const Error& e) {
        send_error(res, to_api_error(e));
      } catch (...) {
        send_error(res, {500, "internal", "internal error"});
      }
    });
    svr.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      if (res.status == 404) {
        send_error(res, {404, "not_found", "no such endpoint"});
      } else if (res.status == 413) {
        send_error(res, {413, "validation", "upload exceeds the configured limit"});
      } else if (res.status >= 400) {
        send_error(res, {res.status, res.status >= 500 ? "internal" : "validation", "request rejected"});
      }
    });
    routes();
    if (!cfg.static_dir.empty() && std::filesystem::is_directory(cfg.static_dir)) {
      svr.set_mount_point("/", cfg.static_dir);
    }
  }

  Job require_job(const std::string& id) const {
    auto job = orch.get(id);
    if (!job) throw Error(ErrorCode::NotFound, "no job '" + id + "'");
    return *job;
  }

  void routes() {
    svr.Get("/api/setups", [this](const httplib::Request& req, httplib::Response& res) {
      json items = json::array();
      for (const auto& s : orch.catalog()) items.push_back(setup_to_json(s));
      const std::string body = items.dump();
      const std::string etag = etag_of(body);
      res.set_header("ETag", etag);
      if (req.get_header_value("If-None-Match") == etag) {
        res.status = 304;
        return;
      }
      res.set_content(body, kJson);
    });

    svr.Post("/api/jobs", [this](const httplib::Request& req, httplib::Response& res) {
      if (!req.is_multipart_form_data() || !req.has_file("file")) {
        throw Error(ErrorCode::InvalidArgument, "multipart field 'file' is required");
      }
      if (!req.has_file("setup_id")) throw Error(ErrorCode::InvalidArgument, "multipart field 'setup_id' is required");
      const auto file = req.get_file_value("file");
      const auto setup_id = req.get_file_value("setup_id").content;
      const std::string name = file.filename.empty() ? "upload.wav" : file.filename;
      const std::string id = orch.submit(as_bytes(file.content), setup_id, name);
      send_json(res, {{"job_id", id}}, 202);
    });

    svr.Get("/api/jobs", [this](const httplib::Request&, httplib::Response& res) {
      json items = json::array();
      for (const auto& j : orch.list()) items.push_back(job_view(j));
      send_json(res, items);
    });

    svr.Get(R"(/api/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, job_view(require_job(req.matches[1])));
    });

    svr.Get(R"(/api/jobs/([^/]+)/result)", [this](const httplib::Request& req, httplib::Response& res) {
      res.set_content(export_json(orch.result(req.matches[1])), kJson);
    });

    svr.Patch(R"(/api/jobs/([^/]+)/result)", [this](const httplib::Request& req, httplib::Response& res) {
      const json body = parse_body(req);
      TranscriptEdit edit;
      try {
        const long index = body.at("segment_index").get<long>();
        if (index < 0) throw Error(ErrorCode::IndexOutOfRange, "negative segment_index");
        edit.segment_index = static_cast<std::size_t>(index);
        edit.expected_revision = body.at("expected_revision").get<long>();
        if (body.contains("new_text") && !body.at("new_text").is_null()) edit.new_text = body.at("new_text").get<std::string>();
        if (body.contains("new_label") && !body.at("new_label").is_null()) edit.new_label = body.at("new_label").get<std::string>();
      } catch (const json::exception&) {
        throw Error(ErrorCode::InvalidArgument, "edit needs integer segment_index and expected_revision");
      }
      res.set_content(export_json(orch.apply_edit(req.matches[1], edit)), kJson);
    });

    svr.Get(R"(/api/jobs/([^/]+)/export)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string format = req.has_param("format") ? req.get_param_value("format") : "srt";
      const TranscriptDocument doc = orch.result(req.matches[1]);
      if (format == "srt") {
        res.set_header("Content-Disposition", "attachment; filename=\"" + doc.media_id + ".srt\"");
        res.set_content(export_srt(doc), "text/plain; charset=utf-8");
      } else if (format == "json") {
        res.set_content(export_json(doc), kJson);
      } else {
        throw Error(ErrorCode::InvalidArgument, "unsupported export format '" + format + "'");
      }
    });

    svr.Get(R"(/api/jobs/([^/]+)/media)", [this](const httplib::Request& req, httplib::Response& res) {
      const auto path = orch.media_path(req.matches[1]);
      res.set_content(storage::read_text(path), "audio/wav");
    });

    svr.Get("/api/speaker-sets", [this](const httplib::Request&, httplib::Response& res) {
      json items = json::array();
      for (const auto& s : speakers.list()) items.push_back(set_view(s));
      send_json(res, items);
    });

    svr.Post("/api/speaker-sets", [this](const httplib::Request& req, httplib::Response& res) {
      const json body = parse_body(req);
      if (!body.contains("set_id") || !body.at("set_id").is_string()) {
        throw Error(ErrorCode::InvalidArgument, "'set_id' string is required");
      }
      const std::string backend = body.value("backend_id", std::string(BaselineBackend::kId));
      send_json(res, set_view(speakers.create(body.at("set_id").get<std::string>(), backend)), 201);
    });

    svr.Post(R"(/api/speaker-sets/([^/]+)/speakers)", [this](const httplib::Request& req, httplib::Response& res) {
      if (!req.is_multipart_form_data() || !req.has_file("display_name")) {
        throw Error(ErrorCode::InvalidArgument, "multipart field 'display_name' is required");
      }
      const auto files = req.get_file_values("file");
      if (files.empty()) throw Error(ErrorCode::InvalidArgument, "at least one 'file' part is required");
      std::vector<AudioBuffer> utterances;
      for (const auto& f : files) utterances.push_back(load_canonical(as_bytes(f.content)));
      const SpeakerProfile p = speakers.enroll(req.matches[1], req.get_file_value("display_name").content, utterances);
      send_json(res, profile_view(p), 201);
    });

    svr.Delete(R"(/api/speaker-sets/([^/]+)/speakers/([^/]+))",
               [this](const httplib::Request& req, httplib::Response& res) {
                 speakers.remove_speaker(req.matches[1], req.matches[2]);
                 res.status = 204;
               });
  }

  ServiceConfig cfg;
  Orchestrator& orch;
  SpeakerRegistry& speakers;
  httplib::Server svr;
};

ApiServer::ApiServer(const ServiceConfig& cfg, Orchestrator& orchestrator, SpeakerRegistry& speakers)
    : impl_(std::make_unique<Impl>(cfg, orchestrator, speakers)) {}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->svr.bind_to_any_port(host);
  return impl_->svr.bind_to_port(host, port) ? port : -1;
}

void ApiServer::serve() { impl_->svr.listen_after_bind(); }

void ApiServer::stop() { impl_->svr.stop(); }

}  // namespace sdsi
