#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sera/daa_losses.hpp"
#include "sera/policy.hpp"
#include "sera/selection.hpp"
#include "sera/synthdata.hpp"

namespace sera {

struct WinRateResult {
  std::size_t wins = 0;
  std::size_t ties = 0;
  std::size_t losses = 0;
  double score = 0.0;
};

// Gold rewards closer than this count as a tie.
inline constexpr double kTieThreshold = 1e-9;

// One response per prompt from each policy, both drawn with the same derived
// seed, judged by gold reward. Wins count 1 and ties 0.5.
WinRateResult win_rate(const SyntheticWorld& world, const TabularPolicy& a, const TabularPolicy& b,
                       std::span<const TokenSeq> prompts, const SampleControls& controls);

struct CorrelationReport {
  double r_squared = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t n = 0;
};

// Least squares y = slope * x + intercept. R^2 is 0 when either variable has
// zero variance.
CorrelationReport linear_fit(std::span<const double> x, std::span<const double> y);

struct RewardCorrelations {
  CorrelationReport vs_gold;
  CorrelationReport vs_length;
  CorrelationReport margin_vs_gold_margin;
};

// Implicit reward of each chosen response (latest snapshot against
// history[reference_index]) regressed on its gold reward and on its length,
// plus implicit margin against gold margin.
RewardCorrelations reward_correlations(const PolicyHistory& history, std::size_t reference_index,
                                       std::span<const PreferencePair> pairs,
                                       const SyntheticWorld& world);

struct AuditSummary {
  std::size_t n_inside = 0;
  std::size_t n_outside = 0;
  double flipped_inside = 0.0;
  double flipped_outside = 0.0;
  double length_inside = 0.0;
  double length_outside = 0.0;
  double flipped_global = 0.0;
};

AuditSummary selection_audit(std::span<const MarginRecord> records, const SelectedSet& selected,
                             std::span<const AuditFlags> flags);

// Margin f(x, y_a, y_b) of a fixed predictor.
using MarginFn = std::function<double(const TokenSeq&, const TokenSeq&, const TokenSeq&)>;

// Variances below this are rounding noise of O(1) losses.
inline constexpr double kVarianceFloor = 1e-20;

struct VarianceCheck {
  double var_bayes = 0.0;
  double var_empirical = 0.0;
  // Standard errors of each variance estimate and of their paired difference.
  double se_bayes = 0.0;
  double se_empirical = 0.0;
  double se_difference = 0.0;
  std::size_t n_resamples = 0;

  // var_empirical - var_bayes exceeds `sigmas` standard errors of the difference.
  bool strictly_lower(double sigmas = 3.0) const;
  // var_bayes <= var_empirical * (1 + sigmas * relative standard error),
  // up to kVarianceFloor.
  bool within_bound(double sigmas = 3.0) const;
};

struct VarianceSampling {
  std::size_t n_samples = 50;
  std::size_t n_resamples = 10000;
  LossKind loss{LossVariant::Dpo, 1.0};
  SampleControls behavior_controls{1.0, 1.0, 6, 0};
  std::uint64_t seed = 0;
};

// Monte-Carlo variance of the empirical risk mean l(f(s)) (labels drawn from
// p*) against the Bayes-distilled risk mean p* l(f) + (1 - p*) l(-f), both
// over resampled sets of n_samples pairs from a uniform behavior policy.
VarianceCheck variance_lemma_check(const SyntheticWorld& world, const MarginFn& margin_fn,
                                   const VarianceSampling& sampling);

// Symmetric matrix of pairwise Jaccard similarities.
std::vector<std::vector<double>> jaccard_matrix(std::span<const SelectedSet> sets);

// Delimited (tab-separated) table with a header row.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
};

void write_table(const std::filesystem::path& path, const Table& table);
Table read_table(const std::filesystem::path& path);

Table win_rate_table(std::span<const std::string> labels, std::span<const WinRateResult> results);
Table jaccard_table(std::span<const std::string> labels,
                    const std::vector<std::vector<double>>& matrix);
Table correlation_table(std::span<const std::string> labels,
                        std::span<const RewardCorrelations> results);

struct NamedTable {
  std::string name;
  Table table;
};

// Writes <dir>/<name>.tsv for every table and returns the written paths.
std::vector<std::filesystem::path> emit_report(std::span<const NamedTable> tables,
                                               const std::filesystem::path& dir);

}  // namespace sera
