#include "mslu/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"
#include "mslu/errors.hpp"

namespace mslu {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

Model Model::create(const ModelConfig& config, Vocab vocab, LabelSet labels, std::uint64_t seed) {
  if (labels.size() < 2) throw InputError("model needs at least one slot label besides O");
  Model m;
  m.config = config;
  m.vocab = std::move(vocab);
  m.labels = std::move(labels);
  m.seed = seed;
  const std::size_t V = m.vocab.size(), M = config.m_embed, K = m.labels.size();
  Rng q(mix_seed(seed, 1)), f(mix_seed(seed, 2)), t(mix_seed(seed, 3)), p(mix_seed(seed, 4)), r(mix_seed(seed, 5));
  m.query_encoder = SentenceEncoder::create(m.query_params, "query_encoder", V, M, config.encoder_hidden,
                                            config.attention, M, q);
  m.feedback_encoder = SentenceEncoder::create(m.feedback_params, "feedback_encoder", V, M, config.encoder_hidden,
                                               config.attention, M, f);
  m.tagger = Tagger::create(m.tagger_params, "tagger", V, M, config.tagger_hidden, config.attention,
                            m.labels.tag_count(), t);
  m.policy = PolicyModel::create(m.policy_params, "policy", M, K, config.policy_match_hidden, config.policy_hidden, p);
  m.reward = RewardModel::create(m.reward_params, "reward", K, M, config.reward_hidden, r);
  return m;
}

bool Model::all_finite() const {
  return query_params.all_finite() && feedback_params.all_finite() && tagger_params.all_finite() &&
         policy_params.all_finite() && reward_params.all_finite();
}

bool Model::same_parameters(const Model& o) const {
  return query_params == o.query_params && feedback_params == o.feedback_params && tagger_params == o.tagger_params &&
         policy_params == o.policy_params && reward_params == o.reward_params;
}

namespace {

constexpr char kMagic[8] = {'M', 'S', '2', 'L', 'U', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in, const char* what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError(std::string("checkpoint truncated in ") + what);
  return v;
}

std::string get_bytes(std::istream& in, std::uint64_t n, const char* what) {
  if (n > (1ull << 32)) throw FormatError(std::string("checkpoint ") + what + " length is implausible");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n)))
    throw FormatError(std::string("checkpoint truncated in ") + what);
  return s;
}

nlohmann::json config_json(const ModelConfig& c) {
  return {{"m_embed", c.m_embed},
          {"encoder_hidden", c.encoder_hidden},
          {"attention", c.attention},
          {"tagger_hidden", c.tagger_hidden},
          {"policy_match_hidden", c.policy_match_hidden},
          {"policy_hidden", c.policy_hidden},
          {"reward_hidden", c.reward_hidden}};
}

ModelConfig config_from(const nlohmann::json& j) {
  ModelConfig c;
  c.m_embed = j.at("m_embed");
  c.encoder_hidden = j.at("encoder_hidden");
  c.attention = j.at("attention");
  c.tagger_hidden = j.at("tagger_hidden");
  c.policy_match_hidden = j.at("policy_match_hidden");
  c.policy_hidden = j.at("policy_hidden");
  c.reward_hidden = j.at("reward_hidden");
  return c;
}

std::vector<const ParamSet*> groups(const Model& m) {
  return {&m.query_params, &m.feedback_params, &m.tagger_params, &m.policy_params, &m.reward_params};
}

}  // namespace

void save_checkpoint(std::ostream& out, const Model& model) {
  std::vector<std::string> slot_labels(model.labels.labels().begin() + 1, model.labels.labels().end());
  std::vector<std::string> tokens(model.vocab.tokens().begin() + 1, model.vocab.tokens().end());
  const nlohmann::json meta{{"config", config_json(model.config)},
                            {"labels", slot_labels},
                            {"vocab", tokens},
                            {"seed", model.seed},
                            {"run", nlohmann::json::parse(model.run_info)}};
  const std::string meta_text = meta.dump();

  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, meta_text.size());
  out.write(meta_text.data(), static_cast<std::streamsize>(meta_text.size()));
  std::uint32_t count = 0;
  for (const ParamSet* g : groups(model)) count += static_cast<std::uint32_t>(g->size());
  put<std::uint32_t>(out, count);
  for (const ParamSet* g : groups(model))
    for (std::size_t i = 0; i < g->size(); ++i) {
      const std::string& name = g->name(i);
      const Tensor& t = (*g)[i];
      put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
      for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
      out.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint " + path.string());
  save_checkpoint(out, model);
  if (!out) throw InputError("failed writing checkpoint " + path.string());
}

Model load_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw FormatError("not a checkpoint (bad magic)");
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto meta_len = get<std::uint64_t>(in, "metadata length");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(get_bytes(in, meta_len, "metadata"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint metadata: ") + e.what());
  }

  Model model;
  try {
    model = Model::create(config_from(meta.at("config")), Vocab(meta.at("vocab").get<std::vector<std::string>>()),
                          LabelSet(meta.at("labels").get<std::vector<std::string>>()), meta.at("seed"));
    model.run_info = meta.at("run").dump();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint metadata: ") + e.what());
  }

  std::vector<ParamSet*> sets{&model.query_params, &model.feedback_params, &model.tagger_params,
                              &model.policy_params, &model.reward_params};
  std::size_t expected = 0;
  for (auto* g : sets) expected += g->size();
  const auto count = get<std::uint32_t>(in, "tensor count");
  if (count != expected)
    throw IntegrityError("checkpoint has " + std::to_string(count) + " tensors, model expects " +
                         std::to_string(expected));
  std::vector<bool> seen(expected, false);
  for (std::uint32_t n = 0; n < count; ++n) {
    const std::string name = get_bytes(in, get<std::uint32_t>(in, "name length"), "tensor name");
    const auto rank = get<std::uint32_t>(in, "rank");
    if (rank == 0 || rank > 4) throw FormatError("tensor '" + name + "' has rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& d : shape) d = get<std::uint64_t>(in, "shape");
    std::size_t offset = 0;
    Tensor* target = nullptr;
    for (auto* g : sets) {
      if (auto i = g->find(name)) {
        target = &(*g)[*i];
        offset += *i;
        break;
      }
      offset += g->size();
    }
    if (!target) throw IntegrityError("checkpoint tensor '" + name + "' is not part of the model");
    if (seen[offset]) throw IntegrityError("checkpoint tensor '" + name + "' appears twice");
    seen[offset] = true;
    if (target->shape() != shape)
      throw IntegrityError("checkpoint tensor '" + name + "' has shape " + shape_string(shape) + ", model expects " +
                           shape_string(target->shape()));
    auto values = target->values();
    if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double))))
      throw FormatError("checkpoint truncated in tensor '" + name + "'");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after checkpoint");
  return model;
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  return load_checkpoint(in);
}

}  // namespace mslu
