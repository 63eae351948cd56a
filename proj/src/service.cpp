#include "mslu/service.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "httplib.h"
#include "json.hpp"
#include "mslu/errors.hpp"

namespace mslu {

using nlohmann::json;

namespace {

json flight_json(const Flight& f) {
  return {{"airline", f.airline},         {"from", f.from}, {"to", f.to}, {"depart_date", f.depart_date},
          {"return_date", f.return_date}, {"type", f.type}, {"fare", f.fare}};
}

json response_json(const RoundResponse& r) {
  json table = json::array();
  for (const auto& row : r.table)
    table.push_back({{"label", row.label}, {"value", row.value}, {"source_round", row.source_round}});
  json flights = json::array();
  for (const auto& f : r.flights) flights.push_back(flight_json(f));
  return {{"round", r.round},
          {"table", std::move(table)},
          {"flights", std::move(flights)},
          {"search_status", r.search_status == SearchStatus::Ok ? "ok" : "insufficient_slots"},
          {"query_string", r.query_string}};
}

std::string session_id(std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s-%06llu", static_cast<unsigned long long>(n));
  return buf;
}

std::optional<std::uint64_t> parse_session_id(const std::string& id) {
  if (id.size() < 3 || id.compare(0, 2, "s-") != 0) return std::nullopt;
  std::uint64_t n = 0;
  for (std::size_t i = 2; i < id.size(); ++i) {
    if (id[i] < '0' || id[i] > '9') return std::nullopt;
    n = 10 * n + static_cast<std::uint64_t>(id[i] - '0');
  }
  return n;
}

std::vector<std::string> checked_tokens(const std::string& text) {
  auto tokens = tokenize(text);
  if (tokens.empty()) throw InputError("empty text");
  return tokens;
}

}  // namespace

std::string round_response_json(const RoundResponse& response) { return response_json(response).dump(); }

SessionManager::SessionManager(std::shared_ptr<const Model> model, std::shared_ptr<const TemplateSet> templates,
                               std::shared_ptr<const FlightBackend> backend, ServiceConfig config)
    : model_(std::move(model)), templates_(std::move(templates)), backend_(std::move(backend)),
      config_(std::move(config)) {
  if (!templates_) templates_ = std::make_shared<TemplateSet>(TemplateSet::builtin());
  if (config_.persist_dir) std::filesystem::create_directories(*config_.persist_dir);
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& id) const {
  std::shared_lock lock(sessions_mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("no session '" + id + "'");
  return it->second;
}

std::shared_ptr<SessionManager::Session> SessionManager::add_session(const std::string& id) {
  auto s = std::make_shared<Session>();
  s->id = id;
  s->rollout = std::make_unique<Rollout>(*model_, MaskSource::Policy, config_.mask_mode, config_.sample_seed);
  std::unique_lock lock(sessions_mutex_);
  sessions_.emplace(id, s);
  return s;
}

std::string SessionManager::create_session() {
  if (!ready()) throw NotReadyError("no model loaded");
  const std::string id = session_id(++counter_);
  add_session(id);
  if (config_.persist_dir) std::ofstream(*config_.persist_dir / (id + ".jsonl"), std::ios::app);
  return id;
}

RoundResponse SessionManager::respond(const RoundResult& result) const {
  RoundResponse r;
  r.round = result.round;
  for (std::size_t i = 0; i < result.table.rows.size(); ++i)
    if (const auto& e = result.table.rows[i]) r.table.push_back({model_->labels.label(i), e->value, e->source_round});
  const FlightQuery q = render_query(result.table, model_->labels, *templates_);
  r.query_string = q.text;
  if (backend_) {
    FlightResult found = flight_search(q, *backend_);
    r.search_status = found.status;
    r.flights = std::move(found.flights);
  } else {
    r.search_status = q.complete ? SearchStatus::Ok : SearchStatus::InsufficientSlots;
  }
  return r;
}

RoundResponse SessionManager::apply(Session& s, const std::string& kind, const std::string& text, bool persist_entry) {
  const auto tokens = checked_tokens(text);
  const RoundResult* result = nullptr;
  if (kind == "query") {
    if (s.rollout->started()) throw ConflictError("session " + s.id + " already has a query");
    result = &s.rollout->start(tokens);
  } else {
    if (!s.rollout->started()) throw ConflictError("session " + s.id + " has no query yet");
    if (s.rollout->rounds() >= config_.max_rounds)
      throw LimitError("session " + s.id + " reached " + std::to_string(config_.max_rounds) + " feedback rounds");
    result = &s.rollout->feedback(tokens);
  }
  Entry entry{kind, text, respond(*result)};
  if (persist_entry) persist(s, entry);
  s.transcript.push_back(entry);
  return entry.response;
}

RoundResponse SessionManager::post_query(const std::string& id, const std::string& text) {
  if (!ready()) throw NotReadyError("no model loaded");
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  return apply(*s, "query", text, true);
}

RoundResponse SessionManager::post_feedback(const std::string& id, const std::string& text) {
  if (!ready()) throw NotReadyError("no model loaded");
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  return apply(*s, "feedback", text, true);
}

void SessionManager::persist(const Session& s, const Entry& e) const {
  if (!config_.persist_dir) return;
  std::ofstream out(*config_.persist_dir / (s.id + ".jsonl"), std::ios::app);
  out << json{{"kind", e.kind}, {"text", e.text}}.dump() << "\n";
  if (!out) throw TransportError("cannot append transcript of " + s.id);
}

std::string SessionManager::transcript_json(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  json rounds = json::array();
  for (const auto& e : s->transcript) rounds.push_back({{"kind", e.kind}, {"text", e.text}, {"response", response_json(e.response)}});
  return json{{"id", s->id}, {"rounds", s->rollout->rounds()}, {"started", s->rollout->started()}, {"max_rounds", config_.max_rounds},
              {"transcript", std::move(rounds)}}
      .dump();
}

std::string SessionManager::health_json() const {
  json j{{"status", ready() ? "ok" : "not_ready"}, {"sessions", session_count()}, {"max_rounds", config_.max_rounds}};
  if (ready()) {
    j["checkpoint"] = config_.checkpoint_label;
    j["labels"] = model_->labels.labels();
    j["vocab_size"] = model_->vocab.size();
  }
  return j.dump();
}

SlotFillingTable SessionManager::table(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  return s->rollout->started() ? s->rollout->table() : SlotFillingTable(model_->k());
}

std::size_t SessionManager::rounds(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  return s->rollout->rounds();
}

std::size_t SessionManager::session_count() const {
  std::shared_lock lock(sessions_mutex_);
  return sessions_.size();
}

std::size_t SessionManager::restore() {
  if (!config_.persist_dir || !ready()) return 0;
  std::vector<std::filesystem::path> files;
  for (const auto& f : std::filesystem::directory_iterator(*config_.persist_dir))
    if (f.is_regular_file() && f.path().extension() == ".jsonl") files.push_back(f.path());
  std::sort(files.begin(), files.end());
  std::size_t restored = 0;
  for (const auto& path : files) {
    const std::string id = path.stem().string();
    const auto n = parse_session_id(id);
    if (!n) continue;
    {
      std::shared_lock lock(sessions_mutex_);
      if (sessions_.count(id)) continue;
    }
    auto s = add_session(id);
    std::ifstream in(path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        const json j = json::parse(line);
        apply(*s, j.at("kind").get<std::string>(), j.at("text").get<std::string>(), false);
      } catch (const json::exception& e) {
        throw FormatError(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    std::uint64_t seen = counter_.load();
    while (*n > seen && !counter_.compare_exchange_weak(seen, *n)) {
    }
    ++restored;
  }
  return restored;
}

int http_status(const char* kind) {
  const std::string k = kind;
  if (k == "not_found") return 404;
  if (k == "conflict" || k == "limit") return 409;
  if (k == "input" || k == "parse" || k == "validation" || k == "vocabulary" || k == "format") return 422;
  if (k == "not_ready") return 503;
  if (k == "transport") return 502;
  return 500;
}

void configure_server(httplib::Server& server, SessionManager& sessions,
                      const std::optional<std::filesystem::path>& static_dir) {
  auto send_error = [](httplib::Response& res, const char* kind, const std::string& message) {
    res.status = http_status(kind);
    res.set_content(json{{"error_kind", kind}, {"message", message}}.dump(), "application/json");
  };
  // Runs a handler, translating library errors into the JSON error shape.
  auto guarded = [send_error](auto handler) {
    return [handler, send_error](const httplib::Request& req, httplib::Response& res) {
      try {
        res.set_content(handler(req), "application/json");
      } catch (const Error& e) {
        send_error(res, e.kind(), e.what());
      } catch (const json::exception& e) {
        send_error(res, "input", e.what());
      } catch (const std::exception& e) {
        send_error(res, "internal", e.what());
      }
    };
  };
  auto body_text = [](const httplib::Request& req) {
    const json j = json::parse(req.body);
    if (!j.is_object() || !j.contains("text") || !j.at("text").is_string())
      throw InputError("body must be an object with a string 'text'");
    return j.at("text").get<std::string>();
  };

  server.Get("/api/health", guarded([&sessions](const httplib::Request&) { return sessions.health_json(); }));
  server.Post("/api/sessions", guarded([&sessions](const httplib::Request&) {
                return json{{"id", sessions.create_session()}}.dump();
              }));
  server.Post(R"(/api/sessions/([^/]+)/query)", guarded([&sessions, body_text](const httplib::Request& req) {
                return round_response_json(sessions.post_query(req.matches[1], body_text(req)));
              }));
  server.Post(R"(/api/sessions/([^/]+)/feedback)", guarded([&sessions, body_text](const httplib::Request& req) {
                return round_response_json(sessions.post_feedback(req.matches[1], body_text(req)));
              }));
  server.Get(R"(/api/sessions/([^/]+))", guarded([&sessions](const httplib::Request& req) {
               return sessions.transcript_json(req.matches[1]);
             }));
  if (static_dir && !server.set_mount_point("/", static_dir->string()))
    throw InputError("static directory " + static_dir->string() + " does not exist");
}

}  // namespace mslu
