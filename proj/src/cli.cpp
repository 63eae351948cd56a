#include "mslu/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "httplib.h"
#include "json.hpp"
#include "mslu/errors.hpp"
#include "mslu/gradient_suite.hpp"
#include "mslu/model.hpp"
#include "mslu/service.hpp"
#include "mslu/synthetic.hpp"
#include "mslu/trainer.hpp"

#ifndef MSLU_DEFAULT_DATA_DIR
#define MSLU_DEFAULT_DATA_DIR "data"
#endif

namespace mslu::cli {

namespace {

using nlohmann::json;

constexpr int kConfigVersion = 1;

std::string default_data(const std::string& name) { return std::string(MSLU_DEFAULT_DATA_DIR) + "/" + name; }

Execution execution_of(bool parallel) { return parallel ? Execution::Parallel : Execution::Serial; }

std::string percent(double x) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << 100.0 * x;
  return s.str();
}

// Flags shared by the commands that load the domain resources.
struct Resources {
  std::string templates;
  std::string flights;

  std::shared_ptr<const TemplateSet> load_templates() const {
    return std::make_shared<TemplateSet>(templates.empty() ? TemplateSet::builtin() : TemplateSet::load(templates));
  }
  std::shared_ptr<const FlightBackend> load_flights(std::ostream& err) const {
    const std::string path = flights.empty() ? default_data("flights.txt") : flights;
    if (flights.empty() && !std::filesystem::exists(path)) {
      err << "note: no flight database at " << path << ", flight search disabled\n";
      return nullptr;
    }
    return std::make_shared<MockFlightBackend>(MockFlightBackend::load(path));
  }
};

void add_resource_flags(CLI::App& cmd, Resources& r) {
  cmd.add_option("--templates", r.templates, "Query template file (default: built-in templates)");
  cmd.add_option("--flights", r.flights, "Fixture flight database (default: data/flights.txt)");
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string corpus, eval_corpus, checkpoint, metrics;
  ModelConfig model = desk_model_config();
  TrainConfig train = desk_train_config();
  bool parallel = false;
};

void add_train_flags(CLI::App& cmd, TrainArgs& a) {
  cmd.add_option("--corpus", a.corpus, "Multiround training corpus (default: synthetic 500-sample corpus)");
  cmd.add_option("--eval-corpus", a.eval_corpus,
                 "Corpus scored after every epoch (default: synthetic test corpus when --corpus is unset)");
  cmd.add_option("--checkpoint,-o", a.checkpoint, "Output checkpoint path")->required();
  cmd.add_option("--metrics", a.metrics, "Metrics log, one JSON object per line (default: <checkpoint>.metrics.jsonl)");
  cmd.add_option("--seed", a.train.seed, "Random seed")->capture_default_str();
  cmd.add_option("--epochs", a.train.epochs, "Adversarial epochs")->capture_default_str();
  cmd.add_option("--tagger-epochs", a.train.tagger_epochs, "Supervised tagger epochs")->capture_default_str();
  cmd.add_option("--batch-size", a.train.batch_size, "Samples per step")->capture_default_str()->check(CLI::PositiveNumber);
  cmd.add_option("--rollouts", a.train.rollouts_per_sample, "Sampled trajectories per sample per policy step")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd.add_option("--lr", a.train.learning_rate, "Base learning rate")->capture_default_str();
  cmd.add_option("--tagger-lr", a.train.tagger_learning_rate, "Tagger learning rate (0 = base)")->capture_default_str();
  cmd.add_option("--reward-lr", a.train.reward_learning_rate, "Reward learning rate (0 = base)")->capture_default_str();
  cmd.add_option("--policy-lr", a.train.policy_learning_rate, "Policy learning rate (0 = base)")->capture_default_str();
  cmd.add_option("--baseline-decay", a.train.baseline_decay, "EMA decay of the REINFORCE baseline")->capture_default_str();
  cmd.add_option("--eval-rounds", a.train.eval_rounds, "Feedback rounds scored per epoch")->capture_default_str();
  cmd.add_flag("!--no-encoder-training", a.train.train_encoders, "Keep the sentence encoders fixed");
  cmd.add_flag("!--no-reward-feedback-encoder", a.train.reward_trains_feedback_encoder,
               "Let only the policy step update the feedback encoder");
  cmd.add_option("--embed", a.model.m_embed, "Embedding width m")->capture_default_str()->check(CLI::PositiveNumber);
  cmd.add_option("--encoder-hidden", a.model.encoder_hidden, "Encoder LSTM width")->capture_default_str();
  cmd.add_option("--attention", a.model.attention, "Encoder attention width")->capture_default_str();
  cmd.add_option("--tagger-hidden", a.model.tagger_hidden, "Tagger LSTM width")->capture_default_str();
  cmd.add_option("--policy-match-hidden", a.model.policy_match_hidden, "Policy matching MLP width")->capture_default_str();
  cmd.add_option("--policy-hidden", a.model.policy_hidden, "Policy LSTM width")->capture_default_str();
  cmd.add_option("--reward-hidden", a.model.reward_hidden, "Reward LSTM width")->capture_default_str();
  cmd.add_flag("--parallel", a.parallel, "Use the OpenMP kernels");
}

int run_train(const TrainArgs& a, std::ostream& out) {
  MultiRoundCorpus corpus = a.corpus.empty() ? desk_train_corpus() : read_multiround_file(a.corpus);
  std::optional<MultiRoundCorpus> eval;
  if (!a.eval_corpus.empty()) {
    eval = read_multiround_file(a.eval_corpus);
  } else if (a.corpus.empty()) {
    eval = desk_test_corpus();
  }
  TrainConfig config = a.train;
  config.execution = execution_of(a.parallel);
  const std::string metrics_path = a.metrics.empty() ? a.checkpoint + ".metrics.jsonl" : a.metrics;
  std::ofstream log(metrics_path);
  if (!log) throw InputError("cannot write " + metrics_path);
  log << json{{"config", json::parse(train_config_json(config))}, {"train_samples", corpus.samples.size()}}.dump() << "\n";

  const TrainResult result = train(corpus, a.model, config, eval ? &*eval : nullptr, [&](const EpochMetrics& m) {
    log << metrics_json(m) << "\n";
    out << "epoch " << m.epoch << "  reward gap " << m.expert_reward - m.policy_reward;
    if (!m.evaluation.rounds.empty()) out << "  round-1 F1 " << percent(m.evaluation.rounds.front().slots.f1);
    out << "\n";
  });
  for (std::size_t e = 0; e < result.tagger_losses.size(); ++e)
    log << json{{"tagger_epoch", e + 1}, {"loss", result.tagger_losses[e]}}.dump() << "\n";
  save_checkpoint(std::filesystem::path(a.checkpoint), result.model);
  out << "wrote " << a.checkpoint << " and " << metrics_path << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string checkpoint, corpus;
  std::size_t rounds = 4;
  bool json_output = false;
  bool parallel = false;
};

int run_eval(const EvalArgs& a, std::ostream& out) {
  const Model model = load_checkpoint(std::filesystem::path(a.checkpoint));
  const MultiRoundCorpus corpus = a.corpus.empty() ? desk_test_corpus() : read_multiround_file(a.corpus);
  const Execution exec = execution_of(a.parallel);
  const Evaluation policy = evaluate(model, corpus, a.rounds, MaskSource::Policy, exec);
  const Evaluation keep_all = evaluate(model, corpus, a.rounds, MaskSource::KeepAll, exec);

  if (a.json_output) {
    auto rows = [](const Evaluation& e) {
      json f1 = json::array(), acc = json::array();
      for (const auto& r : e.rounds) {
        f1.push_back(r.slots.f1);
        acc.push_back(r.sentence_accuracy);
      }
      return json{{"slot_f1", f1}, {"sentence_accuracy", acc}};
    };
    out << json{{"rounds", a.rounds},
                {"evaluated", policy.evaluated},
                {"skipped", policy.skipped},
                {"no_feedback", {{"slot_f1", policy.no_feedback.slots.f1},
                                 {"sentence_accuracy", policy.no_feedback.sentence_accuracy}}},
                {"tagger", rows(keep_all)},
                {"policy", rows(policy)}}
               .dump(2)
        << "\n";
    return kExitOk;
  }

  out << "samples evaluated: " << policy.evaluated << " (skipped " << policy.skipped << " with fewer than " << a.rounds
      << " rounds)\n";
  out << "no-feedback parse: slot F1 " << percent(policy.no_feedback.slots.f1) << ", sentence accuracy "
      << percent(policy.no_feedback.sentence_accuracy) << "\n\n";
  auto table = [&](const std::string& title, auto metric) {
    out << std::left << std::setw(30) << title;
    for (std::size_t t = 1; t <= a.rounds; ++t) out << std::right << std::setw(9) << ("Round " + std::to_string(t));
    out << "\n";
    for (const auto& [name, e] : {std::pair{"tagger (keep all)", &keep_all}, std::pair{"tagger + policy", &policy}}) {
      out << std::left << std::setw(30) << name;
      for (const auto& r : e->rounds) out << std::right << std::setw(9) << percent(metric(r));
      out << "\n";
    }
  };
  table("Model / slot F1 (%)", [](const RoundMetrics& r) { return r.slots.f1; });
  out << "\n";
  table("Model / sentence accuracy (%)", [](const RoundMetrics& r) { return r.sentence_accuracy; });
  return kExitOk;
}

// ---------------------------------------------------------------- synth-data

struct SynthArgs {
  std::string out_path;
  SyntheticCorpusOptions options;
};

int run_synth(const SynthArgs& a, std::ostream& out) {
  const MultiRoundCorpus corpus = synthetic_corpus(a.options);
  write_multiround_file(a.out_path, corpus);
  out << "wrote " << corpus.samples.size() << " samples to " << a.out_path << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckArgs {
  std::size_t configs = 5;
  std::uint64_t seed = 1;
  double tolerance = 1e-5;
};

int run_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  bool all = true;
  for (std::size_t c = 0; c < a.configs; ++c) {
    GradientSuiteConfig config;
    config.seed = a.seed + c;
    config.tolerance = a.tolerance;
    for (const auto& e : run_gradient_suite(config)) {
      all = all && e.passed;
      out << (e.passed ? "PASS " : "FAIL ") << "seed " << config.seed << "  " << std::left << std::setw(18) << e.component
          << " coords " << std::setw(5) << e.report.coordinates << " max rel err " << std::scientific
          << std::setprecision(2) << e.report.max_relative_error << std::defaultfloat;
      if (!e.passed) out << "  at " << e.report.worst_parameter << "[" << e.report.worst_index << "]";
      out << "\n";
    }
  }
  out << (all ? "all gradient checks passed" : "gradient checks FAILED") << "\n";
  return all ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------- serve

struct ServeArgs {
  std::string checkpoint, host = "127.0.0.1", persist_dir, static_dir;
  int port = 8080;
  std::size_t max_rounds = 4;
  bool sample_masks = false;
  Resources resources;
};

httplib::Server* g_server = nullptr;

extern "C" void stop_server(int) {
  if (g_server) g_server->stop();
}

int run_serve(const ServeArgs& a, std::ostream& out, std::ostream& err) {
  std::shared_ptr<const Model> model;
  if (!a.checkpoint.empty()) model = std::make_shared<Model>(load_checkpoint(std::filesystem::path(a.checkpoint)));
  else err << "warning: no --checkpoint, the service reports not_ready\n";
  ServiceConfig config;
  config.max_rounds = a.max_rounds;
  config.checkpoint_label = a.checkpoint;
  config.mask_mode = a.sample_masks ? MaskMode::Sample : MaskMode::Greedy;
  if (!a.persist_dir.empty()) config.persist_dir = a.persist_dir;
  SessionManager sessions(model, a.resources.load_templates(), a.resources.load_flights(err), config);
  if (const std::size_t n = sessions.restore()) out << "restored " << n << " sessions\n";

  httplib::Server server;
  configure_server(server, sessions,
                   a.static_dir.empty() ? std::nullopt : std::optional<std::filesystem::path>(a.static_dir));
  g_server = &server;
  std::signal(SIGINT, stop_server);
  std::signal(SIGTERM, stop_server);
  out << "listening on http://" << a.host << ":" << a.port << std::endl;
  const bool ok = server.listen(a.host, a.port);
  g_server = nullptr;
  if (!ok && !server.is_running()) {
    err << "error: cannot listen on " << a.host << ":" << a.port << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

// ---------------------------------------------------------------- demo

struct DemoArgs {
  std::string scenario = "figure1", checkpoint;
  std::size_t max_rounds = 4;
  Resources resources;
};

void print_round(std::ostream& out, const std::string& speaker_text, const RoundResponse& r) {
  out << "Round " << r.round + 1 << "  user: " << speaker_text << "\n";
  if (r.table.empty()) out << "  (empty table)\n";
  for (const auto& row : r.table) {
    out << "  " << std::left << std::setw(13) << row.label << std::setw(14) << row.value << "(round "
        << row.source_round + 1 << ")" << (row.source_round == r.round && r.round > 0 ? " *" : "") << "\n";
  }
  out << "  query: " << (r.query_string.empty() ? "-" : r.query_string) << "\n";
  if (r.search_status == SearchStatus::InsufficientSlots) {
    out << "  flights: need an origin or destination\n";
  } else {
    out << "  flights: " << r.flights.size() << " found\n";
    for (std::size_t i = 0; i < std::min<std::size_t>(r.flights.size(), 3); ++i) {
      const Flight& f = r.flights[i];
      out << "    " << f.airline << " " << f.from << " -> " << f.to << "  " << f.depart_date << " / "
          << f.return_date << "  " << f.type << "  $" << f.fare << "\n";
    }
  }
}

int run_demo(const DemoArgs& a, std::ostream& out, std::ostream& err) {
  const Scenario scenario = std::filesystem::exists(a.scenario) ? load_scenario(a.scenario) : builtin_scenario(a.scenario);
  std::shared_ptr<const Model> model;
  if (!a.checkpoint.empty()) {
    model = std::make_shared<Model>(load_checkpoint(std::filesystem::path(a.checkpoint)));
  } else {
    err << "no --checkpoint given; training the desk model on the synthetic corpus first\n";
    model = std::make_shared<Model>(train(desk_train_corpus(), desk_model_config(), desk_train_config()).model);
  }
  ServiceConfig config;
  config.max_rounds = a.max_rounds;
  SessionManager sessions(model, a.resources.load_templates(), a.resources.load_flights(err), config);
  const std::string id = sessions.create_session();
  out << "scenario " << scenario.name << " (entries marked * changed this round)\n\n";
  print_round(out, scenario.query, sessions.post_query(id, scenario.query));
  for (const auto& text : scenario.feedback) {
    out << "\n";
    print_round(out, text, sessions.post_feedback(id, text));
  }
  if (!scenario.expected_final.empty()) {
    const SlotValues final_values = sessions.table(id).values(model->labels);
    const bool match = final_values == scenario.expected_final;
    out << "\nfinal table " << (match ? "matches" : "DIFFERS FROM") << " the scenario's expected table\n";
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-step spoken language understanding: training, evaluation and serving", "mslu"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML config file; explicit flags take precedence");
  app.allow_config_extras(false);
  int config_version = 0;
  app.add_option("--config-version", config_version, "Config file format version")->group("");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint plus a metrics log");
  add_train_flags(*train_cmd, train_args);

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Per-round slot F1 and sentence accuracy of a checkpoint");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint to evaluate")->required();
  eval_cmd->add_option("--corpus", eval_args.corpus, "Multiround test corpus (default: synthetic test corpus)");
  eval_cmd->add_option("--rounds", eval_args.rounds, "Feedback rounds to score")->capture_default_str()->check(CLI::PositiveNumber);
  eval_cmd->add_flag("--json", eval_args.json_output, "Print JSON instead of tables");
  eval_cmd->add_flag("--parallel", eval_args.parallel, "Use the OpenMP rollouts");

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth-data", "Write a synthetic multiround corpus");
  synth_cmd->add_option("--out,-o", synth_args.out_path, "Output corpus file")->required();
  synth_cmd->add_option("--samples", synth_args.options.samples, "Number of samples")->capture_default_str();
  synth_cmd->add_option("--seed", synth_args.options.seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--rounds", synth_args.options.rounds, "Rounds per sample (0 = random 1..max)")
      ->capture_default_str();
  synth_cmd->add_option("--max-rounds", synth_args.options.max_rounds, "Upper bound for random round counts")
      ->capture_default_str()
      ->check(CLI::Range(1, 4));

  GradcheckArgs grad_args;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Check every analytic gradient against finite differences");
  grad_cmd->add_option("--configs", grad_args.configs, "Random configurations to check")->capture_default_str();
  grad_cmd->add_option("--seed", grad_args.seed, "Seed of the first configuration")->capture_default_str();
  grad_cmd->add_option("--tolerance", grad_args.tolerance, "Relative error bound")->capture_default_str();

  ServeArgs serve_args;
  auto* serve_cmd = app.add_subcommand("serve", "Run the session service");
  serve_cmd->add_option("--checkpoint", serve_args.checkpoint, "Model checkpoint");
  serve_cmd->add_option("--host", serve_args.host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--port", serve_args.port, "TCP port")->capture_default_str()->check(CLI::Range(1, 65535));
  serve_cmd->add_option("--max-rounds", serve_args.max_rounds, "Feedback rounds per session")->capture_default_str();
  serve_cmd->add_option("--persist-dir", serve_args.persist_dir, "Directory for session transcripts");
  serve_cmd->add_option("--static-dir", serve_args.static_dir, "Static files served at /");
  serve_cmd->add_flag("--sample-masks", serve_args.sample_masks, "Sample masks instead of thresholding (debug)");
  add_resource_flags(*serve_cmd, serve_args.resources);

  DemoArgs demo_args;
  auto* demo_cmd = app.add_subcommand("demo", "Replay a scripted session and print the table after every round");
  demo_cmd->add_option("--scenario", demo_args.scenario, "Built-in scenario name or scenario file")->capture_default_str();
  demo_cmd->add_option("--checkpoint", demo_args.checkpoint, "Model checkpoint (default: train the desk model)");
  demo_cmd->add_option("--max-rounds", demo_args.max_rounds, "Feedback rounds per session")->capture_default_str();
  add_resource_flags(*demo_cmd, demo_args.resources);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
    if (app.get_config_ptr()->count() > 0 && config_version != kConfigVersion)
      throw CLI::ValidationError("--config", "config file must set config-version = " + std::to_string(kConfigVersion));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return run_train(train_args, out);
    if (eval_cmd->parsed()) return run_eval(eval_args, out);
    if (synth_cmd->parsed()) return run_synth(synth_args, out);
    if (grad_cmd->parsed()) return run_gradcheck(grad_args, out);
    if (serve_cmd->parsed()) return run_serve(serve_args, out, err);
    if (demo_cmd->parsed()) return run_demo(demo_args, out, err);
  } catch (const Error& e) {
    err << "error (" << e.kind() << "): " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace mslu::cli
