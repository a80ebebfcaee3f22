#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sera/bootstrap.hpp"
#include "sera/daa_losses.hpp"
#include "sera/policy.hpp"
#include "sera/selection.hpp"

namespace sera {

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct SeraConfig {
  LossKind loss{};
  int iterations = 3;
  double gamma = 0.3;
  std::size_t k = 0;
  std::size_t k_tilde = 0;
  BootstrapConfig bootstrap{};
  int epochs_per_iter = 1;
  double lr = 0.05;
  // 0 means full batch.
  std::size_t batch = 0;
  std::uint64_t seed = 0;
  AdamParams adam{};

  // N is the offline dataset size.
  void validate(std::size_t n_offline) const;

  // T=3, gamma=0.3, k=floor(0.7N), k_tilde=floor(0.3N), R=4, temperature 0.7,
  // top-p 0.95, beta per loss.
  static SeraConfig defaults(LossVariant variant, std::size_t n_offline);
};

struct OptimizerState {
  Matrix first_moment;
  Matrix second_moment;
  long step = 0;

  explicit OptimizerState(const Vocab& vocab)
      : first_moment(vocab.rows(), vocab.cols()), second_moment(vocab.rows(), vocab.cols()) {}
};

// One adaptive-moment update of logits in place.
void adam_step(Matrix& logits, const Matrix& grad, OptimizerState& state, double lr,
               const AdamParams& params);

struct IterationReport {
  int t = 0;
  std::size_t dataset_size = 0;
  std::size_t offline_kept = 0;
  std::size_t bootstrapped_kept = 0;
  double mean_loss_start = 0.0;
  double mean_loss_end = 0.0;
  std::size_t optimizer_steps = 0;
  // mean_loss_end > mean_loss_start
  bool loss_increased = false;
  SelectedSet selected_ids;
  std::size_t snapshot_index = 0;
};

double mean_loss(const LossKind& kind, const TabularPolicy& policy, const TabularPolicy& reference,
                 std::span<const PreferencePair> data);

// epochs_per_iter passes of Adam over data with the reference held fixed.
// Throws NumericalError naming the pair when a loss or gradient goes
// non-finite.
std::pair<TabularPolicy, IterationReport> train_iteration(const TabularPolicy& policy,
                                                          const TabularPolicy& reference,
                                                          std::span<const PreferencePair> data,
                                                          const SeraConfig& cfg, int t = 1);

struct SeraRun {
  PolicyHistory history;
  std::vector<IterationReport> reports;
  // Offline margins and bootstrapped pairs per iteration t >= 2 (index t-2).
  std::vector<std::vector<MarginRecord>> margins;
  std::vector<std::vector<BootstrappedPair>> bootstrapped;
};

// Ids given to bootstrapped pairs inside D_t start here.
inline constexpr std::uint64_t kBootstrapIdBase = 1ULL << 40;

// t=1 trains on the full offline set against the SFT model; each later
// iteration selects the top-k offline pairs by ensembled margin, adds the
// top-k_tilde bootstrapped pairs, and trains against the previous iterate.
SeraRun run_sera(const TabularPolicy& sft, std::span<const PreferencePair> offline,
                 std::span<const TokenSeq> prompts, const SeraConfig& cfg);

}  // namespace sera
