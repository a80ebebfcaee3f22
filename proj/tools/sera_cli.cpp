// sera: command-line front end for data generation, SFT, SeRA training,
// evaluation, analysis and sweeps on the synthetic world.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sera/errors.hpp"
#include "sera/eval.hpp"
#include "sera/experiments.hpp"
#include "sera/format.hpp"
#include "sera/random.hpp"
#include "sera/synthdata.hpp"
#include "sera/trainer.hpp"

#ifndef SERA_VERSION
#define SERA_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace sera;

namespace {

constexpr const char* kOutputRootEnv = "SERA_OUTPUT_ROOT";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

fs::path resolve_out(const std::string& out) {
  fs::path p(out);
  const char* root = std::getenv(kOutputRootEnv);
  if (p.is_relative() && root && *root) p = fs::path(root) / p;
  return p;
}

// Output directory guard plus the manifest written when a command finishes.
class RunDir {
 public:
  RunDir(std::string command, const std::string& out, bool force)
      : command_(std::move(command)), dir_(resolve_out(out)), started_(utc_now()) {
    if (fs::exists(dir_) && !(fs::is_directory(dir_) && fs::is_empty(dir_))) {
      if (!force) {
        throw UsageError("output " + dir_.string() + " already exists; pass --force to overwrite");
      }
      fs::remove_all(dir_);
    }
    fs::create_directories(dir_);
  }

  const fs::path& dir() const { return dir_; }

  fs::path artifact(const fs::path& rel) {
    artifacts_.push_back(rel.generic_string());
    const fs::path p = dir_ / rel;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    return p;
  }

  void finish(const json& config, std::uint64_t seed) const {
    json m;
    m["command"] = command_;
    m["version"] = SERA_VERSION;
    m["seed"] = seed;
    m["config"] = config;
    m["started_at"] = started_;
    m["finished_at"] = utc_now();
    m["artifacts"] = artifacts_;
    std::ofstream out(dir_ / "manifest.json");
    out << m.dump(2) << '\n';
    if (!out) throw IoError("cannot write manifest in " + dir_.string());
  }

 private:
  std::string command_;
  fs::path dir_;
  std::string started_;
  std::vector<std::string> artifacts_;
};

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const std::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

SyntheticWorld load_world(const fs::path& path) {
  const json w = read_json(path);
  try {
    return make_world(w.at("vocab").get<int>(), w.at("sharpness").get<double>(),
                      w.at("world_seed").get<std::uint64_t>(), w.at("prompt_len").get<int>(),
                      w.at("max_len").get<int>(), w.at("eos_bias").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

// ---- gen-data ----

struct GenDataArgs {
  std::string out;
  int vocab = 8;
  std::size_t n_pairs = 2000;
  double flip_rate = 0.0;
  double length_bias_rate = 0.0;
  bool stochastic = false;
  double sharpness = 2.0;
  double eos_bias = -12.0;
  int prompt_len = 2;
  int max_len = 6;
  std::uint64_t seed = 0;
  bool force = false;
};

int cmd_gen_data(const GenDataArgs& a) {
  LabSetup setup;
  setup.vocab_size = a.vocab;
  setup.sharpness = a.sharpness;
  setup.eos_bias = a.eos_bias;
  setup.prompt_len = a.prompt_len;
  setup.max_len = a.max_len;
  setup.n_pairs = a.n_pairs;
  setup.seed = a.seed;
  RunDir run("gen-data", a.out, a.force);
  const SyntheticWorld world = lab_world(setup);
  const GeneratedDataset data = lab_dataset(setup, world, LabelPolicy{a.flip_rate, a.length_bias_rate, a.stochastic});

  std::vector<nlohmann::json> meta(data.pairs.size(), nlohmann::json{{"origin", "offline"}});
  write_jsonl(run.artifact("pairs.jsonl"), data.pairs, meta);
  write_audit(run.artifact("audit.jsonl"), data.audit);
  save_policy(run.artifact("gold.policy"), world.gold);
  json w;
  w["vocab"] = a.vocab;
  w["sharpness"] = a.sharpness;
  w["eos_bias"] = a.eos_bias;
  w["prompt_len"] = a.prompt_len;
  w["max_len"] = a.max_len;
  w["seed"] = a.seed;
  w["world_seed"] = world.seed;
  write_json(run.artifact("world.json"), w);

  std::size_t flipped = 0, length_labeled = 0;
  for (const auto& f : data.audit) {
    flipped += f.was_flipped;
    length_labeled += f.was_length_labeled;
  }
  json cfg = w;
  cfg["n_pairs"] = a.n_pairs;
  cfg["flip_rate"] = a.flip_rate;
  cfg["length_bias_rate"] = a.length_bias_rate;
  cfg["stochastic_labels"] = a.stochastic;
  cfg["flipped"] = flipped;
  cfg["length_labeled"] = length_labeled;
  run.finish(cfg, a.seed);
  return 0;
}

// ---- sft ----

struct SftArgs {
  std::string data, out, world;
  int vocab = 8;
  int epochs = 100;
  double lr = 1.0;
  std::uint64_t seed = 0;
  bool force = false;
};

int cmd_sft(const SftArgs& a) {
  const auto pairs = read_jsonl(a.data);
  int vocab = a.vocab;
  if (!a.world.empty()) vocab = read_json(a.world).at("vocab").get<int>();
  RunDir run("sft", a.out, a.force);
  const TabularPolicy sft = fit_sft(Vocab(vocab), chosen_corpus(pairs), a.epochs, a.lr);
  save_policy(run.artifact("sft.policy"), sft);
  json cfg;
  cfg["data"] = a.data;
  cfg["vocab"] = vocab;
  cfg["epochs"] = a.epochs;
  cfg["lr"] = a.lr;
  cfg["n_examples"] = pairs.size();
  run.finish(cfg, a.seed);
  return 0;
}

// ---- train ----

struct TrainArgs {
  std::string sft, data, out, prompts;
  std::string loss = "dpo";
  std::optional<double> beta;
  int iters = 3;
  double gamma = 0.3;
  double select_prop = 0.7;
  double ktilde_prop = 0.3;
  int r_candidates = 4;
  double temp = 0.7;
  double top_p = 0.95;
  int max_len = 6;
  double lr = 0.05;
  std::size_t batch = 0;
  int epochs = 1;
  std::uint64_t seed = 0;
  bool force = false;
};

std::string policy_name(std::size_t t) { return "policy_" + std::to_string(t) + ".txt"; }
std::string selected_name(int t) { return "selected_" + std::to_string(t) + ".txt"; }

int cmd_train(const TrainArgs& a) {
  const TabularPolicy sft = load_policy(a.sft);
  const auto offline = read_jsonl(a.data);
  for (const auto& p : offline) validate_pair(sft.vocab(), p);
  std::vector<TokenSeq> prompts;
  for (const auto& p : a.prompts.empty() ? offline : read_jsonl(a.prompts)) prompts.push_back(p.prompt);

  const LossVariant variant = parse_loss_variant(a.loss);
  SeraConfig cfg = SeraConfig::defaults(variant, offline.size());
  cfg.loss.beta = a.beta.value_or(default_beta(variant));
  cfg.iterations = a.iters;
  cfg.gamma = a.gamma;
  cfg.k = proportion_to_count(a.select_prop, offline.size());
  cfg.k_tilde = proportion_to_count(a.ktilde_prop, offline.size());
  cfg.bootstrap.r_candidates = a.r_candidates;
  cfg.bootstrap.controls.temperature = a.temp;
  cfg.bootstrap.controls.top_p = a.top_p;
  cfg.bootstrap.controls.max_len = a.max_len;
  cfg.lr = a.lr;
  cfg.batch = a.batch;
  cfg.epochs_per_iter = a.epochs;
  cfg.seed = a.seed;
  cfg.validate(offline.size());

  RunDir run("train", a.out, a.force);
  json c;
  c["sft"] = a.sft;
  c["data"] = a.data;
  c["prompts"] = a.prompts.empty() ? a.data : a.prompts;
  c["loss"] = std::string(to_string(variant));
  c["beta"] = cfg.loss.beta;
  c["iterations"] = cfg.iterations;
  c["gamma"] = cfg.gamma;
  c["select_prop"] = a.select_prop;
  c["ktilde_prop"] = a.ktilde_prop;
  c["n_offline"] = offline.size();
  c["k"] = cfg.k;
  c["k_tilde"] = cfg.k_tilde;
  c["r_candidates"] = cfg.bootstrap.r_candidates;
  c["temperature"] = cfg.bootstrap.controls.temperature;
  c["top_p"] = cfg.bootstrap.controls.top_p;
  c["max_len"] = cfg.bootstrap.controls.max_len;
  c["lr"] = cfg.lr;
  c["batch"] = cfg.batch;
  c["epochs_per_iter"] = cfg.epochs_per_iter;
  c["seed"] = cfg.seed;
  write_json(run.artifact("config.json"), c);

  const SeraRun result = run_sera(sft, offline, prompts, cfg);

  for (std::size_t t = 0; t < result.history.size(); ++t) {
    save_policy(run.artifact(fs::path("snapshots") / policy_name(t)), result.history[t]);
  }
  Table iterations{{"t", "dataset_size", "offline_kept", "bootstrapped_kept", "mean_loss_start",
                    "mean_loss_end", "optimizer_steps", "loss_increased"},
                   {}};
  for (const auto& r : result.reports) {
    write_selected_set(run.artifact(fs::path("selected") / selected_name(r.t)), r.selected_ids);
    iterations.add_row({std::to_string(r.t), std::to_string(r.dataset_size), std::to_string(r.offline_kept),
                        std::to_string(r.bootstrapped_kept), format_double(r.mean_loss_start),
                        format_double(r.mean_loss_end), std::to_string(r.optimizer_steps),
                        r.loss_increased ? "1" : "0"});
    if (r.loss_increased) {
      std::cerr << "warning: mean loss increased during iteration " << r.t << "\n";
    }
  }
  write_table(run.artifact("reports/iterations.tsv"), iterations);
  for (std::size_t i = 0; i < result.margins.size(); ++i) {
    const int t = static_cast<int>(i) + 2;
    Table m{{"pair_id", "margin", "reward_chosen", "reward_rejected"}, {}};
    for (const auto& r : result.margins[i]) {
      m.add_row({std::to_string(r.pair_id), format_double(r.margin), format_double(r.reward_chosen),
                 format_double(r.reward_rejected)});
    }
    write_table(run.artifact("reports/margins_" + std::to_string(t) + ".tsv"), m);

    const auto& boot = result.bootstrapped[i];
    std::vector<PreferencePair> pairs;
    std::vector<nlohmann::json> meta;
    for (std::size_t j = 0; j < boot.size(); ++j) {
      pairs.push_back(PreferencePair{boot[j].prompt, boot[j].chosen, boot[j].rejected, kBootstrapIdBase + j});
      meta.push_back(nlohmann::json{{"origin", "on-policy"},
                                    {"iteration", t},
                                    {"margin", boot[j].margin},
                                    {"source_prompt_id", boot[j].source_prompt_id},
                                    {"round", boot[j].round}});
    }
    write_jsonl(run.artifact("bootstrapped/pairs_" + std::to_string(t) + ".jsonl"), pairs, meta);
  }
  run.finish(c, a.seed);
  return 0;
}

// ---- eval ----

struct EvalArgs {
  std::string run, world, data, against, out;
  std::size_t n_prompts = 2000;
  double temp = 0.7;
  double top_p = 0.95;
  std::uint64_t seed = 0;
  bool force = false;
};

std::vector<TabularPolicy> load_snapshots(const fs::path& run_dir) {
  const json cfg = read_json(run_dir / "config.json");
  const auto iterations = cfg.at("iterations").get<std::size_t>();
  std::vector<std::string> missing;
  for (std::size_t t = 0; t <= iterations; ++t) {
    const fs::path p = run_dir / "snapshots" / policy_name(t);
    if (!fs::exists(p)) missing.push_back(p.string());
  }
  if (!missing.empty()) {
    std::string msg = "missing snapshots:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw IoError(msg);
  }
  std::vector<TabularPolicy> out;
  for (std::size_t t = 0; t <= iterations; ++t) out.push_back(load_policy(run_dir / "snapshots" / policy_name(t)));
  return out;
}

int cmd_eval(const EvalArgs& a) {
  const fs::path run_dir = resolve_out(a.run);
  const auto snapshots = load_snapshots(run_dir);
  const SyntheticWorld world = load_world(a.world);
  const TabularPolicy baseline = a.against.empty() ? snapshots.front() : load_policy(a.against);
  RunDir run("eval", a.out.empty() ? (run_dir / "eval").string() : a.out, a.force);

  const auto prompts = gen_prompts(world, a.n_prompts, derive_seed(a.seed, "eval_prompts"));
  const SampleControls controls{a.temp, a.top_p, world.response_len_max, derive_seed(a.seed, "eval_sampling")};
  std::vector<std::string> labels;
  std::vector<WinRateResult> wins;
  for (std::size_t t = 1; t < snapshots.size(); ++t) {
    labels.push_back("policy_" + std::to_string(t) + "_vs_baseline");
    wins.push_back(win_rate(world, snapshots[t], baseline, prompts, controls));
  }
  std::vector<NamedTable> tables{{"win_rate", win_rate_table(labels, wins)}};
  if (!a.data.empty()) {
    const auto pairs = read_jsonl(a.data);
    PolicyHistory history(snapshots.front());
    std::vector<std::string> rl;
    std::vector<RewardCorrelations> rc;
    for (std::size_t t = 1; t < snapshots.size(); ++t) {
      history.push(snapshots[t]);
      rl.push_back("policy_" + std::to_string(t));
      rc.push_back(reward_correlations(history, 0, pairs, world));
    }
    tables.push_back({"correlations", correlation_table(rl, rc)});
  }
  for (const auto& t : tables) write_table(run.artifact(t.name + ".tsv"), t.table);

  json c;
  c["run"] = a.run;
  c["world"] = a.world;
  c["data"] = a.data;
  c["against"] = a.against.empty() ? "policy_0" : a.against;
  c["n_prompts"] = a.n_prompts;
  c["temperature"] = a.temp;
  c["top_p"] = a.top_p;
  run.finish(c, a.seed);
  return 0;
}

// ---- analyze ----

struct AnalyzeArgs {
  std::vector<std::string> runs;
  std::string sweep_dir, world, out;
  std::size_t n_prompts = 2000;
  std::uint64_t seed = 0;
  bool force = false;
};

int cmd_analyze(const AnalyzeArgs& a) {
  std::vector<fs::path> runs;
  for (const auto& r : a.runs) runs.push_back(resolve_out(r));
  if (!a.sweep_dir.empty()) {
    std::vector<fs::path> found;
    for (const auto& e : fs::directory_iterator(resolve_out(a.sweep_dir))) {
      if (e.is_directory() && fs::exists(e.path() / "config.json")) found.push_back(e.path());
    }
    std::sort(found.begin(), found.end());
    runs.insert(runs.end(), found.begin(), found.end());
  }
  if (runs.empty()) throw UsageError("no runs given; pass --runs or --sweep-dir");

  std::optional<SyntheticWorld> world;
  if (!a.world.empty()) world = load_world(a.world);
  RunDir run("analyze", a.out, a.force);

  std::vector<std::string> labels;
  std::vector<SelectedSet> sets;
  Table curve{{"run", "loss", "iterations", "k", "k_tilde", "gamma", "win_rate_vs_sft"}, {}};
  for (const auto& r : runs) {
    const json cfg = read_json(r / "config.json");
    const int iterations = cfg.at("iterations").get<int>();
    const std::string label = r.filename().string();
    labels.push_back(label);
    const fs::path sel = r / "selected" / selected_name(iterations);
    if (!fs::exists(sel)) throw IoError("missing selected set " + sel.string());
    sets.push_back(read_selected_set(sel));
    std::string score = "";
    if (world) {
      const auto snaps = load_snapshots(r);
      const auto prompts = gen_prompts(*world, a.n_prompts, derive_seed(a.seed, "eval_prompts"));
      const SampleControls controls{0.7, 0.95, world->response_len_max, derive_seed(a.seed, "eval_sampling")};
      score = format_double(win_rate(*world, snaps.back(), snaps.front(), prompts, controls).score);
    }
    curve.add_row({label, cfg.at("loss").get<std::string>(), std::to_string(iterations),
                   std::to_string(cfg.at("k").get<std::size_t>()),
                   std::to_string(cfg.at("k_tilde").get<std::size_t>()),
                   format_double(cfg.at("gamma").get<double>()), score});
  }
  write_table(run.artifact("jaccard.tsv"), jaccard_table(labels, jaccard_matrix(sets)));
  write_table(run.artifact("curve.tsv"), curve);

  json c;
  c["runs"] = a.runs;
  c["sweep_dir"] = a.sweep_dir;
  c["world"] = a.world;
  c["n_prompts"] = a.n_prompts;
  run.finish(c, a.seed);
  return 0;
}

// ---- sweep ----

struct SweepArgs {
  std::string kind = "mixture";
  std::string out;
  std::string loss = "dpo";
  double flip_rate = 0.0;
  double length_bias_rate = 0.0;
  std::size_t n_pairs = 2000;
  std::size_t n_prompts = 2000;
  std::uint64_t seed = 0;
  bool force = false;
};

int cmd_sweep(const SweepArgs& a) {
  LabSetup setup;
  setup.n_pairs = a.n_pairs;
  setup.n_eval_prompts = a.n_prompts;
  setup.seed = a.seed;
  const LossVariant variant = parse_loss_variant(a.loss);
  RunDir run("sweep", a.out, a.force);
  const Lab lab = build_lab(setup, LabelPolicy{a.flip_rate, a.length_bias_rate, false});
  const SeraConfig cfg = lab_config(setup, variant, lab.data.pairs.size());
  const auto rows = a.kind == "gamma" ? gamma_sweep(lab, cfg, kGammaGrid) : mixture_sweep(lab, cfg, kMixtureFractions);
  write_table(run.artifact("curve.tsv"), sweep_table(rows));

  json c;
  c["kind"] = a.kind;
  c["loss"] = a.loss;
  c["flip_rate"] = a.flip_rate;
  c["length_bias_rate"] = a.length_bias_rate;
  c["n_pairs"] = a.n_pairs;
  c["n_prompts"] = a.n_prompts;
  c["batch"] = setup.batch;
  c["lr"] = setup.lr;
  c["sharpness"] = setup.sharpness;
  c["eos_bias"] = setup.eos_bias;
  run.finish(c, a.seed);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SeRA laboratory: preference optimization with implicit-reward selection on a synthetic world"};
  app.set_version_flag("--version", SERA_VERSION);
  app.require_subcommand(1);

  GenDataArgs gd;
  auto* gen = app.add_subcommand("gen-data", "Generate an offline preference dataset and audit sidecar");
  gen->add_option("--out", gd.out, "Output directory")->required();
  gen->add_option("--vocab", gd.vocab, "Regular vocabulary size")->check(CLI::Range(2, 1 << 16));
  gen->add_option("--n-pairs", gd.n_pairs, "Number of pairs")->check(CLI::PositiveNumber);
  gen->add_option("--flip-rate", gd.flip_rate, "Label flip probability")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--length-bias-rate", gd.length_bias_rate, "Prefer-longer probability")->check(CLI::Range(0.0, 1.0));
  gen->add_flag("--stochastic-labels", gd.stochastic, "Draw labels from the true preference");
  gen->add_option("--sharpness", gd.sharpness, "Gold logit scale")->check(CLI::NonNegativeNumber);
  gen->add_option("--eos-bias", gd.eos_bias, "Added to the gold eos logits");
  gen->add_option("--prompt-len", gd.prompt_len)->check(CLI::PositiveNumber);
  gen->add_option("--max-len", gd.max_len)->check(CLI::PositiveNumber);
  gen->add_option("--seed", gd.seed);
  gen->add_flag("--force", gd.force, "Overwrite an existing output directory");

  SftArgs sa;
  auto* sft = app.add_subcommand("sft", "Fit the SFT policy on the chosen responses");
  sft->add_option("--data", sa.data, "Pairs JSONL")->required();
  sft->add_option("--out", sa.out, "Output directory")->required();
  sft->add_option("--world", sa.world, "world.json; overrides --vocab");
  sft->add_option("--vocab", sa.vocab)->check(CLI::Range(2, 1 << 16));
  sft->add_option("--epochs", sa.epochs)->check(CLI::NonNegativeNumber);
  sft->add_option("--lr", sa.lr)->check(CLI::NonNegativeNumber);
  sft->add_option("--seed", sa.seed);
  sft->add_flag("--force", sa.force);

  TrainArgs ta;
  double beta = 0.0;
  auto* train = app.add_subcommand("train", "Run SeRA training and write a run directory");
  train->add_option("--sft", ta.sft, "SFT policy snapshot")->required();
  train->add_option("--data", ta.data, "Offline pairs JSONL")->required();
  train->add_option("--out", ta.out, "Run directory")->required();
  train->add_option("--prompts", ta.prompts, "Pairs JSONL whose prompts seed bootstrapping");
  train->add_option("--loss", ta.loss)->check(CLI::IsMember({"dpo", "ipo", "slic", "simpo"}));
  auto* beta_opt = train->add_option("--beta", beta)->check(CLI::PositiveNumber);
  train->add_option("--iters", ta.iters)->check(CLI::PositiveNumber);
  train->add_option("--gamma", ta.gamma)->check(CLI::Range(0.0, 1.0));
  train->add_option("--select-prop", ta.select_prop)->check(CLI::Range(0.0, 1.0));
  train->add_option("--ktilde-prop", ta.ktilde_prop)->check(CLI::NonNegativeNumber);
  train->add_option("--r-candidates", ta.r_candidates)->check(CLI::Range(2, 1 << 16));
  train->add_option("--temp", ta.temp)->check(CLI::PositiveNumber);
  train->add_option("--top-p", ta.top_p)->check(CLI::Range(0.0, 1.0));
  train->add_option("--max-len", ta.max_len)->check(CLI::PositiveNumber);
  train->add_option("--lr", ta.lr)->check(CLI::NonNegativeNumber);
  train->add_option("--batch", ta.batch, "Mini-batch size, 0 for full batch");
  train->add_option("--epochs", ta.epochs)->check(CLI::PositiveNumber);
  train->add_option("--seed", ta.seed);
  train->add_flag("--force", ta.force);

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Win rates and reward correlations for a run");
  ev->add_option("--run", ea.run, "Run directory")->required();
  ev->add_option("--world", ea.world, "world.json from gen-data")->required();
  ev->add_option("--data", ea.data, "Pairs JSONL for reward correlations");
  ev->add_option("--against", ea.against, "Baseline policy snapshot (default: the run's SFT)");
  ev->add_option("--out", ea.out, "Report directory (default: <run>/eval)");
  ev->add_option("--n-prompts", ea.n_prompts)->check(CLI::PositiveNumber);
  ev->add_option("--temp", ea.temp)->check(CLI::PositiveNumber);
  ev->add_option("--top-p", ea.top_p)->check(CLI::Range(0.0, 1.0));
  ev->add_option("--seed", ea.seed);
  ev->add_flag("--force", ea.force);

  AnalyzeArgs aa;
  auto* an = app.add_subcommand("analyze", "Jaccard matrix and curve rows across runs");
  an->add_option("--runs", aa.runs, "Run directories");
  an->add_option("--sweep-dir", aa.sweep_dir, "Directory whose sub-directories are runs");
  an->add_option("--world", aa.world, "world.json; adds win rates to the curve");
  an->add_option("--out", aa.out, "Report directory")->required();
  an->add_option("--n-prompts", aa.n_prompts)->check(CLI::PositiveNumber);
  an->add_option("--seed", aa.seed);
  an->add_flag("--force", aa.force);

  SweepArgs wa;
  auto* sw = app.add_subcommand("sweep", "Mixture or gamma sweep on the built-in laboratory world");
  sw->add_option("--kind", wa.kind)->check(CLI::IsMember({"mixture", "gamma"}));
  sw->add_option("--out", wa.out, "Output directory")->required();
  sw->add_option("--loss", wa.loss)->check(CLI::IsMember({"dpo", "ipo", "slic", "simpo"}));
  sw->add_option("--flip-rate", wa.flip_rate)->check(CLI::Range(0.0, 1.0));
  sw->add_option("--length-bias-rate", wa.length_bias_rate)->check(CLI::Range(0.0, 1.0));
  sw->add_option("--n-pairs", wa.n_pairs)->check(CLI::PositiveNumber);
  sw->add_option("--n-prompts", wa.n_prompts)->check(CLI::PositiveNumber);
  sw->add_option("--seed", wa.seed);
  sw->add_flag("--force", wa.force);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) return cmd_gen_data(gd);
    if (*sft) return cmd_sft(sa);
    if (*train) {
      if (*beta_opt) ta.beta = beta;
      return cmd_train(ta);
    }
    if (*ev) return cmd_eval(ea);
    if (*an) return cmd_analyze(aa);
    if (*sw) return cmd_sweep(wa);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
