#include <doctest.h>

#include <sstream>

#include "mslu/errors.hpp"
#include "mslu/model.hpp"
#include "mslu/synthetic.hpp"

using namespace mslu;

namespace {

Model small_model() {
  const auto corpus = synthetic_corpus({.seed = 4, .samples = 12});
  ModelConfig c;
  c.m_embed = 5;
  c.encoder_hidden = c.attention = c.tagger_hidden = c.policy_match_hidden = c.policy_hidden = c.reward_hidden = 3;
  Model m = Model::create(c, vocab_of(corpus), labels_of(corpus), 8);
  m.run_info = R"({"note":"test"})";
  return m;
}

std::string bytes_of(const Model& m) {
  std::ostringstream out;
  save_checkpoint(out, m);
  return out.str();
}

Model from_bytes(const std::string& bytes) {
  std::istringstream in(bytes);
  return load_checkpoint(in);
}

}  // namespace

TEST_CASE("checkpoint round-trips bitwise") {
  const Model m = small_model();
  const std::string bytes = bytes_of(m);
  const Model back = from_bytes(bytes);
  CHECK(back.same_parameters(m));
  CHECK(back.config == m.config);
  CHECK(back.vocab == m.vocab);
  CHECK(back.labels == m.labels);
  CHECK(back.seed == m.seed);
  CHECK(back.run_info == m.run_info);
  CHECK(bytes_of(back) == bytes);
  CHECK(bytes.compare(0, 8, "MS2LUCKP") == 0);
}

TEST_CASE("checkpoint files round-trip through the path overloads") {
  const Model m = small_model();
  const auto path = std::filesystem::temp_directory_path() / "mslu_test_roundtrip.ckpt";
  save_checkpoint(path, m);
  CHECK(load_checkpoint(path).same_parameters(m));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path), InputError);
}

TEST_CASE("damaged checkpoints are rejected") {
  const std::string bytes = bytes_of(small_model());
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(from_bytes(bad_magic), FormatError);
  std::string bad_version = bytes;
  bad_version[8] = 7;
  CHECK_THROWS_AS(from_bytes(bad_version), FormatError);
  for (std::size_t cut : {std::size_t{4}, std::size_t{12}, std::size_t{40}, bytes.size() / 2, bytes.size() - 1})
    CHECK_THROWS_AS(from_bytes(bytes.substr(0, cut)), FormatError);
  CHECK_THROWS_AS(from_bytes(""), FormatError);
}
