#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <mutex>
#include <shared_mutex>
#include <string>

#include <json.hpp>

#include "recomed/model.hpp"

namespace recomed {

enum class ApiErrorCode { BadRequest, UnknownMedicine, ModelUnavailable, Internal };

std::string to_string(ApiErrorCode c);
int http_status(ApiErrorCode c);

struct ApiError {
  ApiErrorCode code = ApiErrorCode::Internal;
  std::string message;
  nlohmann::json details = nlohmann::json::object();

  nlohmann::json to_json() const;
};

struct LoadedModel {
  ModelArtifact artifact;
  std::string fingerprint;  // of the serialized artifact
  std::string path;
};

std::shared_ptr<const LoadedModel> load_model_snapshot(const std::filesystem::path& path);
std::shared_ptr<const LoadedModel> make_model_snapshot(ModelArtifact artifact, std::string path = {});

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

using QueryParams = std::map<std::string, std::string>;

/// Transport-free request handling. Readers take a snapshot of the current
/// model under a shared lock, so a reload swaps the pointer atomically and
/// every request sees exactly one (model, rules) pair.
class Service {
 public:
  Service() = default;
  explicit Service(std::shared_ptr<const LoadedModel> model) : model_(std::move(model)) {}

  std::shared_ptr<const LoadedModel> snapshot() const;
  void swap(std::shared_ptr<const LoadedModel> next);

  ApiResponse handle(const std::string& method, const std::string& path, const QueryParams& query,
                     const std::string& body);

 private:
  ApiResponse dispatch(const std::string& method, const std::string& path, const QueryParams& query,
                       const std::string& body);
  ApiResponse reload(const nlohmann::json& req);

  mutable std::shared_mutex mutex_;
  std::mutex reload_mutex_;
  std::shared_ptr<const LoadedModel> model_;
};

nlohmann::json rule_to_json(const ClusterModel& model, std::size_t rule_id, const AssociationRule& r);

/// Parsed /recommend body. Shared by the CLI so both paths resolve names
/// and k the same way.
nlohmann::json recommend_by_names(const ClusterModel& model, const RuleSet& rules,
                                  const std::vector<std::string>& names, std::size_t k);

inline constexpr std::size_t kDefaultTopK = 10;

class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace recomed
