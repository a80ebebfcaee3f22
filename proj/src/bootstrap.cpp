#include "sera/bootstrap.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "sera/errors.hpp"
#include "sera/random.hpp"

namespace sera {

void BootstrapConfig::validate() const {
  if (r_candidates < 2) throw ConfigError("r_candidates must be >= 2");
  if (dedupe_attempts < 1) throw ConfigError("dedupe_attempts must be >= 1");
  controls.validate();
}

std::optional<std::vector<TokenSeq>> generate_candidates(const PolicyHistory& history,
                                                         const TokenSeq& prompt,
                                                         std::uint64_t prompt_id,
                                                         const BootstrapConfig& cfg, int round) {
  cfg.validate();
  const TabularPolicy& policy = history.latest();
  std::vector<TokenSeq> out;
  for (int slot = 0; slot < cfg.r_candidates; ++slot) {
    for (int attempt = 0; attempt < cfg.dedupe_attempts; ++attempt) {
      SampleControls c = cfg.controls;
      c.seed = derive_seed(cfg.controls.seed, "candidate",
                           {prompt_id, static_cast<std::uint64_t>(round),
                            static_cast<std::uint64_t>(slot), static_cast<std::uint64_t>(attempt)});
      TokenSeq y = sample(policy, prompt, c);
      if (std::find(out.begin(), out.end(), y) == out.end()) {
        out.push_back(std::move(y));
        break;
      }
    }
  }
  if (out.size() < 2) return std::nullopt;
  return out;
}

ExtremePick pick_extremes(std::span<const double> rewards) {
  if (rewards.size() < 2) throw PreconditionError("need at least 2 candidates");
  ExtremePick p;
  p.chosen = 0;
  for (std::size_t i = 1; i < rewards.size(); ++i) {
    if (rewards[i] > rewards[p.chosen]) p.chosen = i;
  }
  p.rejected = p.chosen == 0 ? 1 : 0;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    if (i == p.chosen) continue;
    if (rewards[i] < rewards[p.rejected]) p.rejected = i;
  }
  p.margin = rewards[p.chosen] - rewards[p.rejected];
  return p;
}

BootstrappedPair extract_pair(const PolicyHistory& history, const EnsembleSpec& spec,
                              const TokenSeq& prompt, std::span<const TokenSeq> candidates,
                              std::uint64_t prompt_id) {
  if (candidates.size() < 2) throw PreconditionError("need at least 2 candidates");
  std::vector<double> rewards;
  rewards.reserve(candidates.size());
  for (const auto& y : candidates) rewards.push_back(ensemble_reward(history, spec, prompt, y));
  const ExtremePick pick = pick_extremes(rewards);
  if (candidates[pick.chosen] == candidates[pick.rejected]) {
    throw PreconditionError("candidates must be distinct");
  }
  return BootstrappedPair{prompt, candidates[pick.chosen], candidates[pick.rejected], pick.margin,
                          prompt_id, 0};
}

std::vector<BootstrappedPair> bootstrap_dataset(const PolicyHistory& history,
                                                const EnsembleSpec& spec,
                                                std::span<const TokenSeq> prompts,
                                                const BootstrapConfig& cfg) {
  cfg.validate();
  if (cfg.k_tilde == 0) return {};
  if (prompts.empty()) throw PreconditionError("bootstrapping needs at least one prompt");
  const std::size_t rounds = (cfg.k_tilde + prompts.size() - 1) / prompts.size();

  std::vector<BootstrappedPair> pool;
  pool.reserve(rounds * prompts.size());
  for (std::size_t round = 0; round < rounds; ++round) {
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      auto cands = generate_candidates(history, prompts[i], i, cfg, static_cast<int>(round));
      if (!cands) continue;
      BootstrappedPair bp = extract_pair(history, spec, prompts[i], *cands, i);
      bp.round = static_cast<int>(round);
      pool.push_back(std::move(bp));
    }
  }
  if (pool.empty()) throw EmptyResultError("every prompt was degenerate; no bootstrapped pairs");

  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& pa = pool[a];
    const auto& pb = pool[b];
    if (pa.margin != pb.margin) return pa.margin > pb.margin;
    if (pa.source_prompt_id != pb.source_prompt_id) return pa.source_prompt_id < pb.source_prompt_id;
    return pa.round < pb.round;
  });
  const std::size_t keep = std::min(cfg.k_tilde, pool.size());
  std::vector<BootstrappedPair> out;
  out.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) out.push_back(std::move(pool[order[i]]));
  return out;
}

}  // namespace sera
