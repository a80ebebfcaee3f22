#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "sera/daa_losses.hpp"
#include "sera/policy.hpp"

namespace sera {

// Policy iterates: index 0 is the SFT model, index t the policy after
// iteration t. All snapshots share one vocab.
class PolicyHistory {
 public:
  explicit PolicyHistory(TabularPolicy sft);

  void push(TabularPolicy snapshot);

  std::size_t size() const { return snapshots_.size(); }
  const TabularPolicy& operator[](std::size_t i) const { return snapshots_.at(i); }
  const TabularPolicy& latest() const { return snapshots_.back(); }
  const Vocab& vocab() const { return snapshots_.front().vocab(); }
  std::span<const TabularPolicy> snapshots() const { return snapshots_; }

 private:
  std::vector<TabularPolicy> snapshots_;
};

// Which iterate-ensembled reward to compute at iteration t.
struct EnsembleSpec {
  int t = 2;
  double gamma = 0.3;
  // When set, rewards are SimPO rewards of the iterates (reference-free)
  // instead of consecutive log ratios.
  std::optional<double> simpo_beta;
};

// t >= 3: (1-gamma) log(pi_{t-1}/pi_{t-2}) + gamma log(pi_{t-2}/pi_{t-3});
// t == 2: log(pi_1/pi_0).
double ensemble_reward(const PolicyHistory& history, const EnsembleSpec& spec,
                       const TokenSeq& prompt, const TokenSeq& response);
double ensemble_reward(const PolicyHistory& history, int t, double gamma, const TokenSeq& prompt,
                       const TokenSeq& response);

struct MarginRecord {
  std::uint64_t pair_id = 0;
  double margin = 0.0;
  double reward_chosen = 0.0;
  double reward_rejected = 0.0;
};

std::vector<MarginRecord> ensemble_margins(const PolicyHistory& history, const EnsembleSpec& spec,
                                           std::span<const PreferencePair> data);

using SelectedSet = std::set<std::uint64_t>;

// Ids of the k largest margins; ties go to the smaller id.
SelectedSet select_top_k(std::span<const MarginRecord> records, std::size_t k);

// |a ∩ b| / |a ∪ b|, with two empty sets defined as identical.
double jaccard(const SelectedSet& a, const SelectedSet& b);

// floor(proportion * n), tolerant of representation error in the proportion.
std::size_t proportion_to_count(double proportion, std::size_t n);

// One id per line, ascending.
void write_selected_set(const std::filesystem::path& path, const SelectedSet& ids);
SelectedSet read_selected_set(const std::filesystem::path& path);

}  // namespace sera
