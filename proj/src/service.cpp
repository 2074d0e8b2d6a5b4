#include "saxattn/service.hpp"

#include <fstream>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "saxattn/error.hpp"
#include "saxattn/workbench.hpp"

namespace saxattn {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct NotFound : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Session {
  std::string id;
  ExperimentConfig config;
  Workspace ws;
  std::uint64_t version = 1;
  std::map<std::string, GcrModel> models;

  mutable std::shared_mutex mutex;
  mutable std::mutex cache_mutex;
  mutable std::map<std::string, std::shared_ptr<const std::vector<Matrix>>> lamas;

  std::size_t row(const std::string& sample_id) const {
    auto i = ws.find(sample_id);
    if (!i) throw NotFound("unknown sample '" + sample_id + "'");
    return *i;
  }

  std::shared_ptr<const std::vector<Matrix>> lamas_for(const ComboTag& combo) const {
    const auto key = combo.matrix_part().str();
    {
      std::lock_guard lock(cache_mutex);
      if (auto it = lamas.find(key); it != lamas.end()) return it->second;
    }
    auto fresh = std::make_shared<const std::vector<Matrix>>(compute_lamas(ws, combo));
    std::lock_guard lock(cache_mutex);
    return lamas.try_emplace(key, std::move(fresh)).first->second;
  }

  Matrix lama(const ComboTag& combo, std::size_t row) const {
    std::shared_ptr<const std::vector<Matrix>> cached;
    {
      std::lock_guard lock(cache_mutex);
      if (auto it = lamas.find(combo.matrix_part().str()); it != lamas.end()) cached = it->second;
    }
    if (!cached) return aggregate_lama(ws.stacks[row], combo.matrix_part()).matrix;
#ifndef NDEBUG
    if (!((*cached)[row] == aggregate_lama(ws.stacks[row], combo.matrix_part()).matrix)) {
      throw Error(ErrorCode::Io, "cached LAMA differs from a fresh aggregation");
    }
#endif
    return (*cached)[row];
  }

  const GcrModel& model(const std::string& name) const {
    if (auto it = models.find(name); it != models.end()) return it->second;
    const auto at = name.find('@');
    GcrVariant::parse(name.substr(0, at));
    if (at != std::string::npos) {
      ComboTag::parse(name.substr(at + 1));
      throw Error(ErrorCode::UnfinalizedModel, "model " + name + " has not been built");
    }
    const GcrModel* found = nullptr;
    for (const auto& [key, m] : models) {
      if (key.substr(0, key.find('@')) != name) continue;
      if (found) throw Error(ErrorCode::BadParams, "variant " + name + " was built for several combos; use <variant>@<combo>");
      found = &m;
    }
    if (!found) throw Error(ErrorCode::UnfinalizedModel, "model " + name + " has not been built");
    return *found;
  }

  std::vector<std::size_t> rows_from(const json& body, Split fallback) const {
    if (body.contains("sample_id")) return {row(body.at("sample_id").get<std::string>())};
    if (body.contains("sample_ids")) {
      std::vector<std::size_t> out;
      for (const auto& id : body.at("sample_ids")) out.push_back(row(id.get<std::string>()));
      return out;
    }
    if (body.contains("split")) {
      const auto s = body.at("split").get<std::string>();
      for (auto split : {Split::Train, Split::Validation, Split::Test}) {
        if (s == to_string(split)) return ws.dataset.rows(split);
      }
      throw Error(ErrorCode::BadParams, "unknown split '" + s + "'");
    }
    return ws.dataset.rows(fallback);
  }

  json summary() const {
    json samples = json::array();
    for (std::size_t i = 0; i < ws.dataset.size(); ++i) {
      samples.push_back({{"sample_id", ws.sample_ids[i]},
                         {"split", to_string(ws.dataset.split[i])},
                         {"label", ws.dataset.labels[i]}});
    }
    std::vector<std::string> keys;
    for (const auto& [key, m] : models) keys.push_back(key);
    const auto& first = ws.stacks.front();
    return {{"session_id", id},
            {"version", version},
            {"length", ws.dataset.length()},
            {"symbol_count", ws.codec.symbol_count},
            {"symbol_values", ws.codec.mapped_values},
            {"classes", ws.dataset.classes()},
            {"layers", first.layers()},
            {"heads", first.heads()},
            {"samples", samples},
            {"models", keys}};
  }
};

void reply(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, std::string_view code, const std::string& message,
                 const std::string& stage) {
  reply(res, {{"error", code}, {"message", message}, {"stage", stage}}, status);
}

int status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnfinalizedModel: return 409;
    case ErrorCode::Io: return 500;
    default: return 400;
  }
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

Handler guarded(std::string stage, Handler body) {
  return [stage = std::move(stage), body = std::move(body)](const httplib::Request& req, httplib::Response& res) {
    try {
      body(req, res);
    } catch (const NotFound& e) {
      reply_error(res, 404, "NotFound", e.what(), stage);
    } catch (const Error& e) {
      reply_error(res, status_of(e.code()), to_string(e.code()), e.what(), stage);
    } catch (const json::exception& e) {
      reply_error(res, 400, "BadRequest", e.what(), stage);
    } catch (const std::exception& e) {
      reply_error(res, 500, "Internal", e.what(), stage);
    }
  };
}

json body_of(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  auto j = json::parse(req.body);
  if (!j.is_object()) throw Error(ErrorCode::BadParams, "request body must be a JSON object");
  return j;
}

void save(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

ThresholdSpec threshold_from(const json& j) {
  if (j.is_string()) return ThresholdSpec::parse(j.get<std::string>());
  return j.get<ThresholdSpec>();
}

}  // namespace

struct Service::Impl {
  ServiceOptions options;
  httplib::Server server;
  std::thread thread;
  int port = -1;

  std::mutex sessions_mutex;
  std::map<std::string, std::shared_ptr<Session>> sessions;
  std::uint64_t next_id = 1;

  std::string reserve_id() {
    std::lock_guard lock(sessions_mutex);
    return "s" + std::to_string(next_id++);
  }

  std::shared_ptr<Session> open(std::string id, const ExperimentConfig& config) {
    auto s = std::make_shared<Session>();
    s->id = std::move(id);
    s->config = config;
    s->ws = open_workspace(config);
    if (s->ws.stacks.empty()) throw Error(ErrorCode::EmptyBatch, "session has no samples");
    std::lock_guard lock(sessions_mutex);
    sessions[s->id] = s;
    return s;
  }

  std::shared_ptr<Session> session(const std::string& id) {
    std::lock_guard lock(sessions_mutex);
    auto it = sessions.find(id);
    if (it == sessions.end()) throw NotFound("unknown session '" + id + "'");
    return it->second;
  }

  ExperimentConfig config_from_upload(const httplib::Request& req, const std::string& id) {
    const auto dir = options.upload_dir / id;
    fs::create_directories(dir);
    json j = json::object();
    if (req.has_file("config")) j = json::parse(req.get_file_value("config").content);
    if (!req.has_file("train") || !req.has_file("test")) {
      throw Error(ErrorCode::BadConfig, "multipart sessions need 'train' and 'test' files");
    }
    json dataset = json::object();
    for (const char* part : {"train", "validation", "test"}) {
      if (!req.has_file(part)) continue;
      const auto path = dir / (std::string(part) + ".csv");
      save(path, req.get_file_value(part).content);
      dataset[part] = path.string();
    }
    j["dataset"] = dataset;
    if (req.has_file("bundle_manifest")) {
      if (!req.has_file("bundle_payload")) throw Error(ErrorCode::BadBundle, "bundle_manifest without bundle_payload");
      json manifest;
      try {
        manifest = json::parse(req.get_file_value("bundle_manifest").content);
      } catch (const json::exception& e) {
        throw Error(ErrorCode::BadBundle, std::string("manifest: ") + e.what());
      }
      manifest["payload"] = "bundle.bin";
      save(dir / "bundle.bin", req.get_file_value("bundle_payload").content);
      save(dir / "bundle.json", manifest.dump(2));
      j["attention"] = {{"bundle", (dir / "bundle.json").string()}};
    }
    return parse_config(j, dir);
  }

  void routes() {
    server.Post("/sessions", guarded("session", [this](const httplib::Request& req, httplib::Response& res) {
      const auto id = reserve_id();
      const auto config =
          req.is_multipart_form_data() ? config_from_upload(req, id) : parse_config(body_of(req), fs::path{});
      auto s = open(id, config);
      std::shared_lock lock(s->mutex);
      reply(res, s->summary(), 201);
    }));

    server.Get(R"(/sessions/([^/]+))", guarded("session", [this](const httplib::Request& req, httplib::Response& res) {
      auto s = session(req.matches[1]);
      std::shared_lock lock(s->mutex);
      reply(res, s->summary());
    }));

    server.Delete(R"(/sessions/([^/]+))", guarded("session", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(sessions_mutex);
      if (sessions.erase(req.matches[1]) == 0) throw NotFound("unknown session '" + std::string(req.matches[1]) + "'");
      res.status = 204;
    }));

    server.Get(R"(/sessions/([^/]+)/samples/([^/]+)/lama)",
               guarded("aggregate", [this](const httplib::Request& req, httplib::Response& res) {
                 auto s = session(req.matches[1]);
                 std::shared_lock lock(s->mutex);
                 const auto row = s->row(req.matches[2]);
                 if (!req.has_param("combo")) throw Error(ErrorCode::BadCombo, "missing combo parameter");
                 const auto combo = ComboTag::parse(req.get_param_value("combo")).matrix_part();
                 const auto m = s->lama(combo, row);
                 json rows = json::array();
                 for (std::size_t i = 0; i < m.rows(); ++i) {
                   json r = json::array();
                   for (std::size_t j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
                   rows.push_back(r);
                 }
                 reply(res, {{"version", s->version},
                             {"sample_id", s->ws.sample_ids[row]},
                             {"combo", combo.str()},
                             {"matrix", rows}});
               }));

    server.Get(R"(/sessions/([^/]+)/samples/([^/]+)/lava)",
               guarded("aggregate", [this](const httplib::Request& req, httplib::Response& res) {
                 auto s = session(req.matches[1]);
                 std::shared_lock lock(s->mutex);
                 const auto row = s->row(req.matches[2]);
                 if (!req.has_param("combo")) throw Error(ErrorCode::BadCombo, "missing combo parameter");
                 auto combo = ComboTag::parse(req.get_param_value("combo"));
                 if (req.has_param("step3")) combo.step3 = parse_reduce(req.get_param_value("step3"));
                 if (!combo.step3) throw Error(ErrorCode::BadCombo, "LAVA needs step3");
                 const auto lava = aggregate_lava(Lama{s->lama(combo, row), combo.matrix_part(), s->ws.sample_ids[row]},
                                                  *combo.step3);
                 reply(res, {{"version", s->version},
                             {"sample_id", lava.sample_id},
                             {"combo", combo.str()},
                             {"values", lava.values}});
               }));

    server.Post(R"(/sessions/([^/]+)/lasa)", guarded("lasa", [this](const httplib::Request& req, httplib::Response& res) {
      auto s = session(req.matches[1]);
      std::shared_lock lock(s->mutex);
      const auto body = body_of(req);
      const auto combo = ComboTag::parse(body.at("combo").get<std::string>());
      if (!combo.step3) throw Error(ErrorCode::BadCombo, "LASA needs a LAVA combo such as hl-msm");
      const auto spec = threshold_from(body.at("threshold"));
      const auto n = s->ws.dataset.length();
      json results = json::array();
      std::vector<Abstraction> batch;
      for (auto row : s->rows_from(body, Split::Test)) {
        const auto lava =
            aggregate_lava(Lama{s->lama(combo, row), combo.matrix_part(), s->ws.sample_ids[row]}, *combo.step3);
        auto a = abstract_series(s->ws.symbolized[row], lava, resolve_thresholds(lava.values, spec));
        auto record = abstraction_record(a);
        json provenance = json::array();
        for (auto p : a.provenance) provenance.push_back(to_string(p));
        record["provenance"] = provenance;
        const auto v = interpolate(a, n);
        json values = json::array();
        for (std::size_t i = 0; i < n; ++i) values.push_back(v.mask[i] ? json(v.values[i]) : json(nullptr));
        record["validation"] = values;
        record["complexity"] = to_json(abstraction_complexity(a, n));
        results.push_back(record);
        batch.push_back(std::move(a));
      }
      const auto stats = reduction_stats(batch);
      reply(res, {{"version", s->version},
                  {"combo", combo.str()},
                  {"threshold", spec.str()},
                  {"reduction", {{"mean", stats.mean}, {"std", stats.std}}},
                  {"results", results}});
    }));

    server.Post(R"(/sessions/([^/]+)/gcr)", guarded("gcr", [this](const httplib::Request& req, httplib::Response& res) {
      auto s = session(req.matches[1]);
      const auto body = body_of(req);
      std::unique_lock lock(s->mutex);
      auto combos = s->config.gcr_combos;
      auto variants = s->config.variants;
      if (body.contains("combos")) {
        combos.clear();
        for (const auto& c : body.at("combos")) combos.push_back(ComboTag::parse(c.get<std::string>()).matrix_part());
      }
      if (body.contains("variants")) {
        variants.clear();
        for (const auto& v : body.at("variants")) variants.push_back(GcrVariant::parse(v.get<std::string>()));
      }
      std::vector<std::pair<std::string, GcrModel>> built;
      for (const auto& c : combos) {
        const auto lamas = s->lamas_for(c);
        for (const auto& v : variants) built.emplace_back(model_key(v, c), train_model(s->ws, *lamas, v, c));
      }
      std::vector<std::string> keys;
      for (auto& [key, model] : built) {
        keys.push_back(key);
        s->models.insert_or_assign(key, std::move(model));
      }
      ++s->version;
      reply(res, {{"version", s->version}, {"job", {{"status", "finished"}}}, {"models", keys}});
    }));

    server.Get(R"(/sessions/([^/]+)/gcr/([^/]+)/heatmap)",
               guarded("gcr", [this](const httplib::Request& req, httplib::Response& res) {
                 auto s = session(req.matches[1]);
                 std::shared_lock lock(s->mutex);
                 const auto& model = s->model(req.matches[2]);
                 if (!req.has_param("class")) throw Error(ErrorCode::BadParams, "missing class parameter");
                 const int label = std::stoi(req.get_param_value("class"));
                 res.set_content(heatmap_document(model, label, s->ws.codec.mapped_values), "application/json");
               }));

    server.Post(R"(/sessions/([^/]+)/gcr/([^/]+)/classify)",
                guarded("classify", [this](const httplib::Request& req, httplib::Response& res) {
                  auto s = session(req.matches[1]);
                  std::shared_lock lock(s->mutex);
                  const auto& model = s->model(req.matches[2]);
                  const auto rows = s->rows_from(body_of(req), Split::Test);
                  if (rows.empty()) throw Error(ErrorCode::EmptyBatch, "no samples to classify");
                  json results = json::array();
                  std::size_t hits = 0;
                  for (auto row : rows) {
                    const auto r = model.classify(s->ws.symbolized[row]);
                    auto entry = membership_json(model, r);
                    entry["sample_id"] = s->ws.sample_ids[row];
                    entry["label"] = s->ws.dataset.labels[row];
                    hits += r.predicted == s->ws.dataset.labels[row];
                    results.push_back(entry);
                  }
                  reply(res, {{"version", s->version},
                              {"model", std::string(req.matches[2])},
                              {"accuracy", static_cast<double>(hits) / static_cast<double>(rows.size())},
                              {"results", results}});
                }));

    server.Get(R"(/sessions/([^/]+)/certainty-curve)",
               guarded("classify", [this](const httplib::Request& req, httplib::Response& res) {
                 auto s = session(req.matches[1]);
                 std::shared_lock lock(s->mutex);
                 if (!req.has_param("variant")) throw Error(ErrorCode::BadVariant, "missing variant parameter");
                 const auto name = req.get_param_value("variant");
                 const auto& model = s->model(name);
                 auto steps = s->config.certainty_steps;
                 if (req.has_param("steps")) {
                   steps.clear();
                   std::string text = req.get_param_value("steps");
                   std::size_t start = 0;
                   while (start <= text.size()) {
                     const auto comma = text.find(',', start);
                     const auto part = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
                     std::size_t used = 0;
                     double v = 0.0;
                     try {
                       v = std::stod(part, &used);
                     } catch (const std::exception&) {
                       used = 0;
                     }
                     if (used == 0 || used != part.size()) throw Error(ErrorCode::BadFraction, "bad step '" + part + "'");
                     steps.push_back(v);
                     if (comma == std::string::npos) break;
                     start = comma + 1;
                   }
                 }
                 json query = json::object();
                 if (req.has_param("split")) query["split"] = req.get_param_value("split");
                 const auto rows = s->rows_from(query, Split::Test);
                 if (rows.empty()) throw Error(ErrorCode::EmptyBatch, "no samples to score");
                 std::vector<MembershipResult> results;
                 std::vector<int> gold;
                 for (auto row : rows) {
                   results.push_back(model.classify(s->ws.symbolized[row]));
                   gold.push_back(s->ws.dataset.labels[row]);
                 }
                 const auto curve = certainty_curve(results, gold, steps);
                 reply(res, {{"version", s->version}, {"model", name}, {"curve", to_json(curve)}});
               }));
  }
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->options = std::move(options);
  impl_->routes();
}

Service::~Service() { stop(); }

int Service::bind() {
  if (impl_->port > 0) return impl_->port;
  auto& o = impl_->options;
  if (o.port == 0) {
    impl_->port = impl_->server.bind_to_any_port(o.host);
  } else {
    impl_->port = impl_->server.bind_to_port(o.host, o.port) ? o.port : -1;
  }
  if (impl_->port <= 0) throw Error(ErrorCode::Io, "cannot bind " + o.host + ":" + std::to_string(o.port));
  return impl_->port;
}

void Service::listen() {
  bind();
  impl_->server.listen_after_bind();
}

int Service::start() {
  const int port = bind();
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void Service::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string Service::create_session(const ExperimentConfig& config) {
  return impl_->open(impl_->reserve_id(), config)->id;
}

}  // namespace saxattn
