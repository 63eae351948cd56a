#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "mslu/model.hpp"
#include "mslu/pipeline.hpp"
#include "mslu/slot_table.hpp"

namespace httplib {
class Server;
}

namespace mslu {

struct ServiceConfig {
  std::size_t max_rounds = 4;  // feedback rounds per session
  MaskMode mask_mode = MaskMode::Greedy;
  std::uint64_t sample_seed = 0;  // only used with MaskMode::Sample
  // Transcripts are appended to <persist_dir>/<id>.jsonl when set.
  std::optional<std::filesystem::path> persist_dir;
  std::string checkpoint_label;  // reported by the health endpoint
};

struct TableRow {
  std::string label;
  std::string value;
  std::size_t source_round = 0;

  friend bool operator==(const TableRow&, const TableRow&) = default;
};

struct RoundResponse {
  std::size_t round = 0;
  std::vector<TableRow> table;  // label order of the model
  SearchStatus search_status = SearchStatus::Ok;
  std::vector<Flight> flights;
  std::string query_string;
};

std::string round_response_json(const RoundResponse& response);

// Owns the live sessions. The model, templates and backend are shared
// read-only; each session's mutations run under that session's mutex.
class SessionManager {
 public:
  SessionManager(std::shared_ptr<const Model> model, std::shared_ptr<const TemplateSet> templates,
                 std::shared_ptr<const FlightBackend> backend, ServiceConfig config = {});

  bool ready() const noexcept { return model_ != nullptr; }
  const ServiceConfig& config() const noexcept { return config_; }

  // Ids are "s-" followed by a zero-padded six-digit counter.
  std::string create_session();
  RoundResponse post_query(const std::string& id, const std::string& text);
  RoundResponse post_feedback(const std::string& id, const std::string& text);
  // Full transcript as a JSON document.
  std::string transcript_json(const std::string& id) const;
  std::string health_json() const;

  // Current table of a session; used by the parity checks.
  SlotFillingTable table(const std::string& id) const;
  std::size_t rounds(const std::string& id) const;
  std::size_t session_count() const;

  // Rebuilds sessions from the transcripts in persist_dir; returns how many
  // were restored.
  std::size_t restore();

 private:
  struct Entry {
    std::string kind;  // "query" or "feedback"
    std::string text;
    RoundResponse response;
  };
  struct Session {
    std::string id;
    std::mutex mutex;
    std::unique_ptr<Rollout> rollout;
    std::vector<Entry> transcript;
  };

  std::shared_ptr<Session> find(const std::string& id) const;
  std::shared_ptr<Session> add_session(const std::string& id);
  RoundResponse respond(const RoundResult& result) const;
  RoundResponse apply(Session& session, const std::string& kind, const std::string& text, bool persist);
  void persist(const Session& session, const Entry& entry) const;

  std::shared_ptr<const Model> model_;
  std::shared_ptr<const TemplateSet> templates_;
  std::shared_ptr<const FlightBackend> backend_;
  ServiceConfig config_;

  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::atomic<std::uint64_t> counter_{0};
};

// HTTP status for an error kind: 404 not_found, 409 conflict/limit,
// 422 bad input, 503 not_ready, 502 transport, 500 otherwise.
int http_status(const char* error_kind);

// Registers the JSON API (and a static-file mount when static_dir is set).
void configure_server(httplib::Server& server, SessionManager& sessions,
                      const std::optional<std::filesystem::path>& static_dir = std::nullopt);

}  // namespace mslu
