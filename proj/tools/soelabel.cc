// soelabel: stage-per-command driver for the table labeling pipeline.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <pthread.h>
#include <thread>

#include "CLI11.hpp"
#include "soelabel/review_server.h"
#include "soelabel/stages.h"

namespace {

using namespace soelabel;

int serve(const RunConfig& config) {
  auto queue = open_review_queue(config);
  const auto added = enqueue_from_artifacts(*queue, config);
  ReviewServerOptions opts;
  if (!config.static_dir.empty()) opts.static_dir = config.resolve(config.static_dir);
  ReviewServer server(*queue, opts);

  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
  });

  std::cerr << "review service on " << config.listen_host << ":" << config.port << " ("
            << queue->stats().enqueued << " items, " << added << " new)\n";
  const bool ok = server.listen(config.listen_host, config.port);
  if (!ok) {
    std::cerr << "error: cannot listen on " << config.listen_host << ":" << config.port << "\n";
    pthread_kill(waiter.native_handle(), SIGTERM);
  }
  waiter.join();
  queue->write_snapshot();
  return ok ? 0 : 3;
}

void parse_listen(const std::string& s, RunConfig& config) {
  const auto pos = s.rfind(':');
  if (pos == std::string::npos) throw Error(ErrorCode::kConfigError, "--listen must be host:port");
  config.listen_host = s.substr(0, pos);
  try {
    config.port = std::stoi(s.substr(pos + 1));
  } catch (const std::exception&) {
    throw Error(ErrorCode::kConfigError, "bad port in --listen");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Schedule-of-Events table labeling pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(soelabel::kVersion));

  RunConfig config;
  std::string policy = "filtered";
  std::string views = "both";
  std::string mode = "macro";
  std::vector<std::size_t> split;
  double sensitivity = -1.0;
  double specificity = -1.0;
  double human_accuracy = -1.0;
  long claim_ttl = 900;
  std::string listen = "127.0.0.1:8765";
  std::vector<std::string> annotators;
  std::vector<std::string> experts;
  bool no_screen = false;

  app.add_option("--out-dir", config.out_dir, "Output directory; relative paths resolve here")
      ->capture_default_str();
  app.add_option("--corpus", config.corpus_path, "Corpus JSON-Lines file (ingest)");

  app.add_option("--protocols", config.synthetic.n_protocols, "Synthetic protocol count")
      ->capture_default_str();
  app.add_option("--tables-min", config.synthetic.min_tables_per_protocol)->capture_default_str();
  app.add_option("--tables-max", config.synthetic.max_tables_per_protocol)->capture_default_str();
  app.add_option("--positive-rate", config.synthetic.positive_rate)->capture_default_str();
  app.add_option("--corpus-seed", config.synthetic.seed)->capture_default_str();

  app.add_option("--labeler-url", config.labeler_url, "LLM endpoint; unset uses the noise model")
      ->envname("LABELER_URL");
  app.add_option("--labeler-token", config.labeler_token)->envname("LABELER_TOKEN");
  app.add_option("--labeler-id", config.labeler_id, "Annotator used for consensus");
  app.add_option("--labelers", config.n_labelers, "Simulated labeler count")->capture_default_str();
  app.add_option("--sensitivity", sensitivity, "Per-view sensitivity (both views)");
  app.add_option("--specificity", specificity, "Per-view specificity (both views)");
  app.add_option("--sensitivity-json", config.noise.sensitivity_json)->capture_default_str();
  app.add_option("--specificity-json", config.noise.specificity_json)->capture_default_str();
  app.add_option("--sensitivity-text", config.noise.sensitivity_text)->capture_default_str();
  app.add_option("--specificity-text", config.noise.specificity_text)->capture_default_str();
  app.add_option("--rho", config.noise.cross_view_correlation, "Cross-view error correlation")
      ->capture_default_str();
  app.add_option("--noise-seed", config.noise.seed)->capture_default_str();
  app.add_option("--max-in-flight", config.max_in_flight)->capture_default_str();

  app.add_flag("--no-screen", no_screen, "Annotate every table, skipping the screening gate");
  app.add_option("--screener-url", config.screener_url);
  app.add_option("--screener-sensitivity", config.screener_sensitivity)->capture_default_str();
  app.add_option("--screener-specificity", config.screener_specificity)->capture_default_str();
  app.add_option("--screener-rho", config.screener_correlation)->capture_default_str();
  app.add_option("--screener-seed", config.screener_seed)->capture_default_str();

  app.add_option("--policy", policy, "all | filtered | hybrid")->capture_default_str();
  app.add_option("--split", split, "train validation test protocol counts")->expected(3);
  app.add_option("--split-seed", config.split_seed)->capture_default_str();
  app.add_option("--views", views, "json | text | both")->capture_default_str();

  app.add_option("--epochs", config.train.epochs)->capture_default_str();
  app.add_option("--lr", config.train.learning_rate)->capture_default_str();
  app.add_option("--l2", config.train.l2)->capture_default_str();
  app.add_option("--train-seed", config.train.seed)->capture_default_str();
  app.add_option("--feature-dim", config.feature_dim)->capture_default_str();

  app.add_option("--mode", mode, "micro | macro")->capture_default_str();
  app.add_option("--replications", config.bootstrap_replications)->capture_default_str();
  app.add_option("--ci-level", config.ci_level)->capture_default_str();
  app.add_option("--bootstrap-seed", config.bootstrap_seed)->capture_default_str();
  app.add_option("--channel", config.channels, "Ensemble channel labeler:VIEW (repeatable)");

  app.add_option("--review-dir", config.review_dir, "Review service data directory")
      ->envname("REVIEW_DATA_DIR");
  app.add_option("--claim-ttl", claim_ttl, "Claim lease in seconds")
      ->envname("REVIEW_CLAIM_TTL")
      ->capture_default_str();
  app.add_option("--annotator", annotators, "Registered annotator id (repeatable)");
  app.add_option("--expert", experts, "Expert id (repeatable)");
  app.add_option("--simulate-human", human_accuracy,
                 "Label queued items with a simulated annotator of this accuracy");
  app.add_option("--human-seed", config.human_seed)->capture_default_str();
  app.add_option("--listen", listen, "host:port")->envname("REVIEW_LISTEN")->capture_default_str();
  app.add_option("--static-dir", config.static_dir, "Review UI bundle to serve at /");

  const std::vector<std::pair<std::string, std::string>> commands{
      {"ingest", "Validate and normalize a corpus"},
      {"screen", "Run the base screener"},
      {"annotate", "Label both views of each table"},
      {"filter", "Consensus filter; optionally enqueue disagreements for review"},
      {"assemble", "Build fine-tuning datasets under a labeling policy"},
      {"train", "Train the proxy classifier"},
      {"evaluate", "Score the proxy classifier on the test split"},
      {"ensemble", "Sweep ensemble thresholds"},
      {"serve", "Run the review service"},
      {"simulate", "Generate a synthetic corpus and annotate it offline"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  const std::string stage = app.get_subcommands().front()->get_name();

  try {
    if (sensitivity >= 0.0) config.noise.sensitivity_json = config.noise.sensitivity_text = sensitivity;
    if (specificity >= 0.0) config.noise.specificity_json = config.noise.specificity_text = specificity;
    if (human_accuracy >= 0.0) config.simulate_human_accuracy = human_accuracy;
    config.screening = !no_screen;
    config.policy = policy_from_string(policy);
    config.views = view_choice_from_string(views);
    config.eval_mode = metric_mode_from_string(mode);
    if (split.size() == 3) config.split = {split[0], split[1], split[2]};
    config.claim_ttl = std::chrono::seconds(claim_ttl);
    config.roles.annotators.insert(annotators.begin(), annotators.end());
    config.roles.experts.insert(experts.begin(), experts.end());
    parse_listen(listen, config);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (stage == "serve") {
      config.validate(stage);
      return serve(config);
    }
    std::cout << run_stage(stage, config) << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
