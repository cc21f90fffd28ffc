#include "recomed/service.hpp"

#include <algorithm>
#include <charconv>

#include <httplib.h>

#include "recomed/error.hpp"
#include "recomed/fingerprint.hpp"
#include "recomed/recommend.hpp"
#include "recomed/text.hpp"

namespace recomed {

using nlohmann::json;

std::string to_string(ApiErrorCode c) {
  switch (c) {
    case ApiErrorCode::BadRequest: return "bad_request";
    case ApiErrorCode::UnknownMedicine: return "unknown_medicine";
    case ApiErrorCode::ModelUnavailable: return "model_unavailable";
    case ApiErrorCode::Internal: return "internal";
  }
  return "internal";
}

int http_status(ApiErrorCode c) {
  switch (c) {
    case ApiErrorCode::BadRequest: return 400;
    case ApiErrorCode::UnknownMedicine: return 404;
    case ApiErrorCode::ModelUnavailable: return 503;
    case ApiErrorCode::Internal: return 500;
  }
  return 500;
}

json ApiError::to_json() const {
  return {{"error", {{"code", to_string(code)}, {"message", message}, {"details", details}}}};
}

std::shared_ptr<const LoadedModel> make_model_snapshot(ModelArtifact artifact, std::string path) {
  auto m = std::make_shared<LoadedModel>();
  m->fingerprint = fingerprint(serialize_model(artifact));
  m->artifact = std::move(artifact);
  m->path = std::move(path);
  return m;
}

std::shared_ptr<const LoadedModel> load_model_snapshot(const std::filesystem::path& path) {
  return make_model_snapshot(load_model(path), path.string());
}

std::shared_ptr<const LoadedModel> Service::snapshot() const {
  std::shared_lock lock(mutex_);
  return model_;
}

void Service::swap(std::shared_ptr<const LoadedModel> next) {
  std::unique_lock lock(mutex_);
  model_ = std::move(next);
}

namespace {

struct ApiFailure {
  ApiError error;
};

[[noreturn]] void fail(ApiErrorCode code, std::string message, json details = json::object()) {
  throw ApiFailure{{code, std::move(message), std::move(details)}};
}

json parse_body(const std::string& body) {
  if (trim(body).empty()) return json::object();
  json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded()) fail(ApiErrorCode::BadRequest, "request body is not valid JSON");
  if (!doc.is_object()) fail(ApiErrorCode::BadRequest, "request body must be a JSON object");
  return doc;
}

std::vector<std::string> medicine_names(const json& req) {
  if (!req.contains("medicines") || !req["medicines"].is_array()) {
    fail(ApiErrorCode::BadRequest, "'medicines' must be an array of strings");
  }
  std::vector<std::string> names;
  for (const auto& m : req["medicines"]) {
    if (!m.is_string()) fail(ApiErrorCode::BadRequest, "'medicines' must be an array of strings");
    names.push_back(m.get<std::string>());
  }
  if (names.empty()) fail(ApiErrorCode::BadRequest, "'medicines' is empty");
  return names;
}

std::size_t read_k(const json& req) {
  if (!req.contains("k")) return kDefaultTopK;
  const auto& k = req["k"];
  if (!k.is_number_integer() || k.get<std::int64_t>() < 1) fail(ApiErrorCode::BadRequest, "'k' must be a positive integer");
  return k.get<std::size_t>();
}

std::size_t parse_count(const std::string& text, const char* what) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size() || v == 0) {
    fail(ApiErrorCode::BadRequest, std::string("'") + what + "' must be a positive integer");
  }
  return v;
}

json medicine_ref(const ClusterModel& model, MedId id) {
  return {{"med_id", id}, {"name", model.medicine(id).name}};
}

ApiResponse recommend_endpoint(const LoadedModel& lm, const json& req) {
  auto body = recommend_by_names(lm.artifact.model, lm.artifact.rules, medicine_names(req), read_k(req));
  body["fingerprint"] = lm.fingerprint;
  return {200, std::move(body)};
}

ApiResponse explain_endpoint(const LoadedModel& lm, const json& req) {
  const auto& model = lm.artifact.model;
  auto names = medicine_names(req);
  auto res = resolve_medicines(model, names);
  if (res.known.empty()) fail(ApiErrorCode::UnknownMedicine, "none of the medicines are known", {{"unknown", res.unknown}});
  if (!req.contains("candidate")) fail(ApiErrorCode::BadRequest, "'candidate' is required");
  MedId candidate = 0;
  const auto& c = req["candidate"];
  if (c.is_number_unsigned()) {
    candidate = c.get<MedId>();
    if (!model.contains(candidate)) fail(ApiErrorCode::UnknownMedicine, "unknown candidate", {{"unknown", {c}}});
  } else if (c.is_string()) {
    auto ids = model.find_by_name(c.get<std::string>());
    if (ids.empty()) fail(ApiErrorCode::UnknownMedicine, "unknown candidate", {{"unknown", {c}}});
    candidate = ids.front();
  } else {
    fail(ApiErrorCode::BadRequest, "'candidate' must be a name or med_id");
  }
  Explanation e;
  try {
    e = explain(model, lm.artifact.rules, res.known, candidate);
  } catch (const UnknownMedicinesError&) {
    throw;
  } catch (const Error& err) {
    fail(ApiErrorCode::BadRequest, err.what());
  }
  json body = explanation_to_json(model, e);
  body["unknown"] = res.unknown;
  body["fingerprint"] = lm.fingerprint;
  return {200, std::move(body)};
}

ApiResponse medicines_endpoint(const LoadedModel& lm, const QueryParams& query) {
  const auto& model = lm.artifact.model;
  std::string prefix;
  if (auto it = query.find("q"); it != query.end()) prefix = normalize_name(it->second);
  std::size_t limit = 20;
  if (auto it = query.find("limit"); it != query.end()) limit = parse_count(it->second, "limit");
  // Catalog is sorted by normalized name, so the prefix range is contiguous.
  auto first = std::lower_bound(model.catalog.begin(), model.catalog.end(), prefix,
                                [](const MedicineCatalogEntry& e, const std::string& p) { return e.normalized_name < p; });
  json items = json::array();
  for (auto it = first; it != model.catalog.end() && items.size() < limit; ++it) {
    if (!starts_with(it->normalized_name, prefix)) break;
    items.push_back({{"med_id", it->med_id},
                     {"name", it->name},
                     {"normalized_name", it->normalized_name},
                     {"frequency", it->frequency}});
  }
  return {200, {{"medicines", std::move(items)}, {"fingerprint", lm.fingerprint}}};
}

ApiResponse clusters_endpoint(const LoadedModel& lm) {
  const auto& model = lm.artifact.model;
  json communities = json::array();
  for (std::size_t c = 0; c < model.partition.communities.size(); ++c) {
    json members = json::array();
    for (MedId id : model.partition.communities[c]) {
      json m = medicine_ref(model, id);
      m["atc"] = code_strings(model.annotations.at(id).codes);
      members.push_back(std::move(m));
    }
    communities.push_back({{"id", c}, {"size", model.partition.communities[c].size()}, {"members", std::move(members)}});
  }
  json outliers = json::array();
  for (MedId id : model.outliers.med_ids) outliers.push_back(medicine_ref(model, id));
  json stop = json::array();
  for (MedId id : model.stoplist.med_ids) stop.push_back(medicine_ref(model, id));
  double q = modularity(model.similarity, model.partition, model.config.resolution, model.outliers.med_ids);
  return {200,
          {{"communities", std::move(communities)},
           {"outliers", std::move(outliers)},
           {"stop_medicines", std::move(stop)},
           {"modularity", q},
           {"fingerprint", lm.fingerprint}}};
}

ApiResponse rules_endpoint(const LoadedModel& lm, const QueryParams& query) {
  const auto& model = lm.artifact.model;
  auto it = query.find("medicine");
  if (it == query.end() || trim(it->second).empty()) fail(ApiErrorCode::BadRequest, "'medicine' query parameter is required");
  auto ids = model.find_by_name(it->second);
  if (ids.empty()) fail(ApiErrorCode::UnknownMedicine, "unknown medicine", {{"unknown", {it->second}}});
  json rules = json::array();
  const auto& all = lm.artifact.rules.rules;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto& r = all[i];
    bool touches = std::any_of(ids.begin(), ids.end(), [&](MedId id) {
      return std::binary_search(r.antecedent.begin(), r.antecedent.end(), id) ||
             std::binary_search(r.consequent.begin(), r.consequent.end(), id);
    });
    if (touches) rules.push_back(rule_to_json(model, i, r));
  }
  return {200, {{"rules", std::move(rules)}, {"fingerprint", lm.fingerprint}}};
}

ApiResponse health_endpoint(const std::shared_ptr<const LoadedModel>& lm) {
  if (!lm) return {503, {{"status", "unavailable"}, {"fingerprint", nullptr}}};
  const auto& model = lm->artifact.model;
  return {200,
          {{"status", "ok"},
           {"fingerprint", lm->fingerprint},
           {"built_at", model.built_at},
           {"medicines", model.catalog.size()},
           {"communities", model.partition.communities.size()},
           {"rules", lm->artifact.rules.rules.size()}}};
}

}  // namespace

json rule_to_json(const ClusterModel& model, std::size_t rule_id, const AssociationRule& r) {
  json ante = json::array(), cons = json::array();
  for (MedId id : r.antecedent) ante.push_back(medicine_ref(model, id));
  for (MedId id : r.consequent) cons.push_back(medicine_ref(model, id));
  return {{"rule_id", rule_id},
          {"antecedent", std::move(ante)},
          {"consequent", std::move(cons)},
          {"support", r.support},
          {"confidence", r.confidence},
          {"lift", r.lift},
          {"strength", to_string(r.strength)}};
}

json recommend_by_names(const ClusterModel& model, const RuleSet& rules, const std::vector<std::string>& names,
                        std::size_t k) {
  auto res = resolve_medicines(model, names);
  if (res.known.empty()) throw UnknownMedicinesError(res.unknown);
  return recommend_response_json(model, recommend(model, rules, res.known, k), res.unknown);
}

ApiResponse Service::reload(const json& req) {
  if (!req.contains("path") || !req["path"].is_string() || req["path"].get<std::string>().empty()) {
    fail(ApiErrorCode::BadRequest, "'path' must be a non-empty string");
  }
  std::string path = req["path"].get<std::string>();
  std::lock_guard writer(reload_mutex_);
  std::shared_ptr<const LoadedModel> next;
  try {
    next = load_model_snapshot(path);
  } catch (const std::exception& e) {
    fail(ApiErrorCode::BadRequest, std::string("reload failed: ") + e.what(), {{"path", path}});
  }
  auto previous = snapshot();
  swap(next);
  return {200,
          {{"status", "reloaded"},
           {"fingerprint", next->fingerprint},
           {"previous_fingerprint", previous ? json(previous->fingerprint) : json(nullptr)}}};
}

ApiResponse Service::dispatch(const std::string& method, const std::string& path, const QueryParams& query,
                              const std::string& body) {
  auto known_route = [&](const char* m, const char* p) { return method == m && path == p; };
  if (known_route("GET", "/api/v1/health")) return health_endpoint(snapshot());
  if (known_route("POST", "/api/v1/reload")) return reload(parse_body(body));

  const bool routed = known_route("POST", "/api/v1/recommend") || known_route("POST", "/api/v1/explain") ||
                      known_route("GET", "/api/v1/medicines") || known_route("GET", "/api/v1/clusters") ||
                      known_route("GET", "/api/v1/rules");
  if (!routed) fail(ApiErrorCode::BadRequest, "no route for " + method + " " + path);

  auto lm = snapshot();
  if (!lm) fail(ApiErrorCode::ModelUnavailable, "no model loaded");
  if (path == "/api/v1/recommend") return recommend_endpoint(*lm, parse_body(body));
  if (path == "/api/v1/explain") return explain_endpoint(*lm, parse_body(body));
  if (path == "/api/v1/medicines") return medicines_endpoint(*lm, query);
  if (path == "/api/v1/clusters") return clusters_endpoint(*lm);
  return rules_endpoint(*lm, query);
}

ApiResponse Service::handle(const std::string& method, const std::string& path, const QueryParams& query,
                            const std::string& body) {
  ApiError err;
  try {
    return dispatch(method, path, query, body);
  } catch (const ApiFailure& f) {
    err = f.error;
  } catch (const UnknownMedicinesError& e) {
    err = {ApiErrorCode::UnknownMedicine, "none of the medicines are known", {{"unknown", e.names()}}};
  } catch (const Error& e) {
    err = {ApiErrorCode::BadRequest, e.what(), json::object()};
  } catch (const std::exception& e) {
    err = {ApiErrorCode::Internal, e.what(), json::object()};
  }
  return {http_status(err.code), err.to_json()};
}

struct HttpServer::Impl {
  explicit Impl(Service& s) : service(s) {}
  Service& service;
  httplib::Server server;
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    QueryParams query;
    for (const auto& [k, v] : req.params) query.emplace(k, v);
    ApiResponse r = impl_->service.handle(req.method, req.path, query, req.body);
    res.status = r.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(r.body.dump(), "application/json");
  };
  impl_->server.Get(R"(/.*)", route);
  impl_->server.Post(R"(/.*)", route);
  impl_->server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.status = 204;
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace recomed
