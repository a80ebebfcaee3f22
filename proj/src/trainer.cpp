#include "sera/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sera/errors.hpp"
#include "sera/random.hpp"

namespace sera {

void SeraConfig::validate(std::size_t n_offline) const {
  loss.validate();
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  if (k > n_offline) {
    throw ConfigError("k=" + std::to_string(k) + " exceeds offline size " + std::to_string(n_offline));
  }
  if (epochs_per_iter < 1) throw ConfigError("epochs_per_iter must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be non-negative");
  if (iterations >= 2 && k == 0 && k_tilde == 0) {
    throw ConfigError("k = k_tilde = 0 leaves iterations >= 2 with an empty dataset");
  }
  if (k_tilde > 0) bootstrap.validate();
}

SeraConfig SeraConfig::defaults(LossVariant variant, std::size_t n_offline) {
  SeraConfig cfg;
  cfg.loss = LossKind{variant, default_beta(variant)};
  cfg.k = proportion_to_count(0.7, n_offline);
  cfg.k_tilde = proportion_to_count(0.3, n_offline);
  cfg.bootstrap.controls.temperature = 0.7;
  cfg.bootstrap.controls.top_p = 0.95;
  cfg.bootstrap.r_candidates = 4;
  return cfg;
}

void adam_step(Matrix& logits, const Matrix& grad, OptimizerState& state, double lr,
               const AdamParams& params) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(params.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(params.beta2, static_cast<double>(state.step));
  auto theta = logits.flat();
  auto g = grad.flat();
  auto m = state.first_moment.flat();
  auto v = state.second_moment.flat();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    m[i] = params.beta1 * m[i] + (1.0 - params.beta1) * g[i];
    v[i] = params.beta2 * v[i] + (1.0 - params.beta2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    theta[i] -= lr * mhat / (std::sqrt(vhat) + params.eps);
  }
}

double mean_loss(const LossKind& kind, const TabularPolicy& policy, const TabularPolicy& reference,
                 std::span<const PreferencePair> data) {
  if (data.empty()) throw PreconditionError("mean loss of an empty dataset");
  double s = 0.0;
  for (const auto& p : data) s += pair_loss(kind, policy, reference_scores(reference, p), p);
  return s / static_cast<double>(data.size());
}

namespace {

double cached_mean_loss(const LossKind& kind, const TabularPolicy& policy,
                        std::span<const ReferenceScores> refs, std::span<const PreferencePair> data) {
  double s = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) s += pair_loss(kind, policy, refs[i], data[i]);
  return s / static_cast<double>(data.size());
}

}  // namespace

std::pair<TabularPolicy, IterationReport> train_iteration(const TabularPolicy& policy,
                                                          const TabularPolicy& reference,
                                                          std::span<const PreferencePair> data,
                                                          const SeraConfig& cfg, int t) {
  if (data.empty()) throw PreconditionError("training data must be non-empty");
  if (policy.vocab() != reference.vocab()) throw DomainError("policy/reference vocab mismatch");
  const Vocab& vocab = policy.vocab();

  std::vector<ReferenceScores> refs;
  refs.reserve(data.size());
  for (const auto& p : data) refs.push_back(reference_scores(reference, p));

  IterationReport report;
  report.t = t;
  report.dataset_size = data.size();
  report.mean_loss_start = cached_mean_loss(cfg.loss, policy, refs, data);

  const std::size_t batch = cfg.batch == 0 ? data.size() : std::min(cfg.batch, data.size());
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  OptimizerState state(vocab);
  TabularPolicy current = policy;
  for (int epoch = 0; epoch < cfg.epochs_per_iter; ++epoch) {
    if (cfg.batch != 0) {
      Rng rng(derive_seed(cfg.seed, "shuffle",
                          {static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(epoch)}));
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    }
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(start + batch, order.size());
      const double scale = 1.0 / static_cast<double>(end - start);
      Matrix grad(vocab.rows(), vocab.cols());
      for (std::size_t j = start; j < end; ++j) {
        const std::size_t i = order[j];
        const double l = accumulate_loss_grad(cfg.loss, current, refs[i], data[i], scale, grad);
        if (!std::isfinite(l)) {
          throw NumericalError("non-finite loss on pair " + std::to_string(data[i].id));
        }
      }
      for (double g : grad.flat()) {
        if (!std::isfinite(g)) {
          throw NumericalError("non-finite gradient in batch starting at pair " +
                               std::to_string(data[order[start]].id));
        }
      }
      Matrix next = current.logits();
      adam_step(next, grad, state, cfg.lr, cfg.adam);
      current = TabularPolicy(vocab, std::move(next));
      ++report.optimizer_steps;
    }
  }

  report.mean_loss_end = cached_mean_loss(cfg.loss, current, refs, data);
  report.loss_increased = report.mean_loss_end > report.mean_loss_start;
  return {std::move(current), std::move(report)};
}

SeraRun run_sera(const TabularPolicy& sft, std::span<const PreferencePair> offline,
                 std::span<const TokenSeq> prompts, const SeraConfig& cfg) {
  if (offline.empty()) throw PreconditionError("offline dataset must be non-empty");
  cfg.validate(offline.size());

  SeraRun run{PolicyHistory(sft), {}, {}, {}};

  auto [first, report1] = train_iteration(sft, sft, offline, cfg, 1);
  report1.offline_kept = offline.size();
  for (const auto& p : offline) report1.selected_ids.insert(p.id);
  run.history.push(std::move(first));
  report1.snapshot_index = 1;
  run.reports.push_back(std::move(report1));

  for (int t = 2; t <= cfg.iterations; ++t) {
    EnsembleSpec spec{t, cfg.gamma, std::nullopt};
    if (cfg.loss.variant == LossVariant::Simpo) spec.simpo_beta = cfg.loss.beta;

    std::vector<MarginRecord> margins = ensemble_margins(run.history, spec, offline);
    SelectedSet selected = select_top_k(margins, cfg.k);

    BootstrapConfig bcfg = cfg.bootstrap;
    bcfg.k_tilde = cfg.k_tilde;
    bcfg.controls.seed = derive_seed(cfg.seed, "bootstrap", {static_cast<std::uint64_t>(t)});
    std::vector<BootstrappedPair> boot = bootstrap_dataset(run.history, spec, prompts, bcfg);

    std::vector<PreferencePair> dt;
    dt.reserve(selected.size() + boot.size());
    for (const auto& p : offline) {
      if (selected.count(p.id)) dt.push_back(p);
    }
    for (std::size_t i = 0; i < boot.size(); ++i) {
      dt.push_back(PreferencePair{boot[i].prompt, boot[i].chosen, boot[i].rejected,
                                  kBootstrapIdBase + i});
    }
    if (dt.empty()) throw ConfigError("iteration " + std::to_string(t) + " has an empty dataset");

    const TabularPolicy& prev = run.history.latest();
    auto [next, report] = train_iteration(prev, prev, dt, cfg, t);
    report.offline_kept = selected.size();
    report.bootstrapped_kept = boot.size();
    report.selected_ids = std::move(selected);
    run.history.push(std::move(next));
    report.snapshot_index = run.history.size() - 1;
    run.reports.push_back(std::move(report));
    run.margins.push_back(std::move(margins));
    run.bootstrapped.push_back(std::move(boot));
  }
  return run;
}

}  // namespace sera
