#pragma once

#include <memory>
#include <string>

#include "sdsi/config.hpp"
#include "sdsi/errors.hpp"
#include "sdsi/orchestrator.hpp"
#include "sdsi/speaker_registry.hpp"

namespace sdsi {

struct ApiError {
  int http_status = 500;
  std::string code;  // unknown_setup, malformed_media, not_found, revision_conflict, validation, internal
  std::string message;
};

ApiError to_api_error(const Error& e);

// HTTP/JSON front end over the orchestrator and the speaker registry.
class ApiServer {
 public:
  ApiServer(const ServiceConfig& cfg, Orchestrator& orchestrator, SpeakerRegistry& speakers);
  ~ApiServer();

  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  // Binds host:port (port 0 picks a free one) and returns the bound port, or -1.
  int bind(const std::string& host, int port);
  // Serves until stop(); call after bind().
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace sdsi
