// HTTP service: job submission, results, export and speaker enrollment.

#include <CLI11.hpp>

#include <csignal>
#include <iostream>

#include "sdsi/api_server.hpp"

namespace {

sdsi::ApiServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speaker diarization + identification service"};
  std::string config_path = SDSI_DEFAULT_CONFIG;
  std::optional<int> port;
  std::optional<std::string> data_dir;
  std::string host = "0.0.0.0";
  app.add_option("--config", config_path, "Configuration file (setups catalog, workers, paths)");
  app.add_option("--port", port, "Listen port (overrides SDSI_PORT and the config file)");
  app.add_option("--data-dir", data_dir, "Job and speaker-set storage (overrides SDSI_DATA_DIR)");
  app.add_option("--host", host, "Bind address");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    sdsi::ServiceConfig cfg = sdsi::load_config(config_path);
    sdsi::apply_env_overrides(cfg);
    if (port) cfg.port = *port;
    if (data_dir) cfg.data_dir = *data_dir;

    sdsi::SpeakerRegistry speakers(std::filesystem::path(cfg.data_dir) / "speaker_sets");
    sdsi::Orchestrator orch({cfg.data_dir, cfg.workers, cfg.setups, {}}, speakers);
    orch.start();
    sdsi::ApiServer server(cfg, orch, speakers);
    const int bound = server.bind(host, cfg.port);
    if (bound < 0) {
      std::cerr << "cannot bind " << host << ":" << cfg.port << "\n";
      return 1;
    }
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cout << "listening on " << host << ":" << bound << " (data: " << cfg.data_dir << ", workers: "
              << cfg.workers << ")" << std::endl;
    server.serve();
    g_server = nullptr;
    orch.stop();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
