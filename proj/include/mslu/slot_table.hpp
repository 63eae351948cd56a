#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mslu/corpus.hpp"
#include "mslu/tensor.hpp"

namespace mslu {

struct TableEntry {
  std::string value;
  std::size_t source_round = 0;
  Tensor embedding;  // the masked row that wrote this entry

  friend bool operator==(const TableEntry&, const TableEntry&) = default;
};

// One optional entry per label index.
struct SlotFillingTable {
  std::vector<std::optional<TableEntry>> rows;

  SlotFillingTable() = default;
  explicit SlotFillingTable(std::size_t labels) : rows(labels) {}

  std::size_t filled() const;
  SlotValues values(const LabelSet& labels) const;

  friend bool operator==(const SlotFillingTable&, const SlotFillingTable&) = default;
};

// Labels whose masked row is non-zero take the provenance value (inserted or
// overwritten); every other label keeps its previous entry. Returns a new table.
SlotFillingTable update_table(const SlotFillingTable& prev, const Tensor& masked,
                              const std::vector<std::optional<std::string>>& provenance, std::size_t round);

struct FlightQuery {
  std::string text;
  SlotValues fields;
  bool complete = false;
};

// Query templates. File format (line-oriented, '#' comments):
//   mslu-templates 1
//   skeleton <label>[,<label>...] = <text with {label} holes>
//   prefix <label> = <text>
//   clause <label> = <text>
// The skeleton with the most labels, all filled, is used; prefixes go in
// front of it and clauses after it, in file order, when their label is filled.
class TemplateSet {
 public:
  static TemplateSet parse(std::istream& in);
  static TemplateSet load(const std::filesystem::path& path);
  static TemplateSet builtin();

  FlightQuery render(const SlotValues& values) const;

 private:
  struct Skeleton {
    std::vector<std::string> labels;
    std::string text;
  };
  struct Piece {
    std::string label;
    std::string text;
  };
  std::vector<Skeleton> skeletons_;
  std::vector<Piece> prefixes_;
  std::vector<Piece> clauses_;
};

FlightQuery render_query(const SlotFillingTable& table, const LabelSet& labels, const TemplateSet& templates);

struct Flight {
  std::string airline, from, to, depart_date, return_date, type;
  double fare = 0.0;

  friend bool operator==(const Flight&, const Flight&) = default;
};

enum class SearchStatus { Ok, InsufficientSlots };

struct FlightResult {
  SearchStatus status = SearchStatus::Ok;
  std::vector<Flight> flights;
};

class FlightBackend {
 public:
  virtual ~FlightBackend() = default;
  // Flights matching every given field, in a stable order. Throws
  // TransportError when the backend cannot be reached.
  virtual std::vector<Flight> search(const SlotValues& fields) const = 0;
};

// Fixture database, one flight per line:
//   airline|from|to|depart_date|return_date|type|fare   ('-' = none)
class MockFlightBackend : public FlightBackend {
 public:
  explicit MockFlightBackend(std::vector<Flight> flights) : flights_(std::move(flights)) {}
  static MockFlightBackend parse(std::istream& in);
  static MockFlightBackend load(const std::filesystem::path& path);

  std::vector<Flight> search(const SlotValues& fields) const override;
  const std::vector<Flight>& flights() const noexcept { return flights_; }

 private:
  std::vector<Flight> flights_;
};

// Incomplete queries return InsufficientSlots without touching the backend.
FlightResult flight_search(const FlightQuery& query, const FlightBackend& backend);

}  // namespace mslu
