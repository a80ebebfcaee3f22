#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sera/daa_losses.hpp"
#include "sera/policy.hpp"
#include "sera/selection.hpp"

namespace sera {

struct BootstrapConfig {
  int r_candidates = 4;
  std::size_t k_tilde = 0;
  SampleControls controls{};
  int dedupe_attempts = 16;

  void validate() const;
};

struct BootstrappedPair {
  TokenSeq prompt;
  TokenSeq chosen;
  TokenSeq rejected;
  double margin = 0.0;
  std::uint64_t source_prompt_id = 0;
  int round = 0;
};

// Samples up to r_candidates distinct responses from the latest snapshot.
// Each slot retries up to dedupe_attempts times with seeds derived from
// (controls.seed, prompt_id, round, slot, attempt). Returns nullopt when fewer
// than two distinct responses could be drawn.
std::optional<std::vector<TokenSeq>> generate_candidates(const PolicyHistory& history,
                                                         const TokenSeq& prompt,
                                                         std::uint64_t prompt_id,
                                                         const BootstrapConfig& cfg, int round = 0);

struct ExtremePick {
  std::size_t chosen = 0;
  std::size_t rejected = 1;
  double margin = 0.0;
};

// argmax / argmin with ties to the lowest index; the rejected index skips the
// chosen one so a fully tied set yields (0, 1).
ExtremePick pick_extremes(std::span<const double> rewards);

BootstrappedPair extract_pair(const PolicyHistory& history, const EnsembleSpec& spec,
                              const TokenSeq& prompt, std::span<const TokenSeq> candidates,
                              std::uint64_t prompt_id = 0);

// Builds the on-policy pair pool and keeps the top-k_tilde by margin. When
// k_tilde exceeds the number of prompts, ceil(k_tilde / #prompts) independent
// rounds are pooled. If the pool is smaller than k_tilde the whole pool is
// returned. Throws EmptyResultError when every prompt is degenerate.
std::vector<BootstrappedPair> bootstrap_dataset(const PolicyHistory& history,
                                                const EnsembleSpec& spec,
                                                std::span<const TokenSeq> prompts,
                                                const BootstrapConfig& cfg);

}  // namespace sera
