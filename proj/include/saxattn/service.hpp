#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "saxattn/config.hpp"

namespace saxattn {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  /// 0 picks a free port.
  int port = 8080;
  /// Where multipart uploads are stored, one directory per session.
  std::filesystem::path upload_dir = std::filesystem::temp_directory_path() / "saxattn-sessions";
};

/// HTTP front end over in-memory sessions. Each session has one writer at a
/// time (GCR builds) and any number of concurrent readers.
class Service {
 public:
  explicit Service(ServiceOptions options = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and returns the port; throws Io when binding fails.
  int bind();
  /// Serves until stop(); bind() is called first if needed.
  void listen();
  /// Binds, serves on a background thread and returns the port.
  int start();
  void stop();

  /// Opens a session directly, as POST /sessions would. Returns its id.
  std::string create_session(const ExperimentConfig& config);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace saxattn
