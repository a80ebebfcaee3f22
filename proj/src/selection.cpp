#include "sera/selection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "sera/errors.hpp"

namespace sera {

PolicyHistory::PolicyHistory(TabularPolicy sft) { snapshots_.push_back(std::move(sft)); }

void PolicyHistory::push(TabularPolicy snapshot) {
  if (snapshot.vocab() != vocab()) throw DomainError("snapshot vocab differs from history");
  snapshots_.push_back(std::move(snapshot));
}

namespace {

// Reward of a single iterate pair or SimPO iterate.
double step_reward(const PolicyHistory& h, const EnsembleSpec& spec, int newer,
                   const TokenSeq& prompt, const TokenSeq& response) {
  if (spec.simpo_beta) return simpo_reward(h[newer], prompt, response, *spec.simpo_beta);
  return log_prob(h[newer], prompt, response) - log_prob(h[newer - 1], prompt, response);
}

}  // namespace

double ensemble_reward(const PolicyHistory& history, const EnsembleSpec& spec,
                       const TokenSeq& prompt, const TokenSeq& response) {
  if (spec.t < 2 || static_cast<std::size_t>(spec.t) > history.size()) {
    throw PreconditionError("ensemble reward at t=" + std::to_string(spec.t) + " needs " +
                            std::to_string(spec.t) + " snapshots, history has " +
                            std::to_string(history.size()));
  }
  if (!(spec.gamma >= 0.0 && spec.gamma <= 1.0)) throw PreconditionError("gamma must lie in [0, 1]");
  const double recent = step_reward(history, spec, spec.t - 1, prompt, response);
  if (spec.t == 2) return recent;
  const double older = step_reward(history, spec, spec.t - 2, prompt, response);
  return (1.0 - spec.gamma) * recent + spec.gamma * older;
}

double ensemble_reward(const PolicyHistory& history, int t, double gamma, const TokenSeq& prompt,
                       const TokenSeq& response) {
  return ensemble_reward(history, EnsembleSpec{t, gamma, std::nullopt}, prompt, response);
}

std::vector<MarginRecord> ensemble_margins(const PolicyHistory& history, const EnsembleSpec& spec,
                                           std::span<const PreferencePair> data) {
  if (data.empty()) throw PreconditionError("margin computation needs a non-empty dataset");
  std::vector<MarginRecord> out;
  out.reserve(data.size());
  for (const auto& p : data) {
    MarginRecord rec;
    rec.pair_id = p.id;
    rec.reward_chosen = ensemble_reward(history, spec, p.prompt, p.chosen);
    rec.reward_rejected = ensemble_reward(history, spec, p.prompt, p.rejected);
    rec.margin = rec.reward_chosen - rec.reward_rejected;
    out.push_back(rec);
  }
  return out;
}

SelectedSet select_top_k(std::span<const MarginRecord> records, std::size_t k) {
  if (k > records.size()) {
    throw PreconditionError("k=" + std::to_string(k) + " exceeds " +
                            std::to_string(records.size()) + " records");
  }
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (records[a].margin != records[b].margin) return records[a].margin > records[b].margin;
    return records[a].pair_id < records[b].pair_id;
  });
  SelectedSet out;
  for (std::size_t i = 0; i < k; ++i) out.insert(records[order[i]].pair_id);
  return out;
}

double jaccard(const SelectedSet& a, const SelectedSet& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (auto id : a) inter += b.count(id);
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::size_t proportion_to_count(double proportion, std::size_t n) {
  if (!(proportion >= 0.0)) throw ConfigError("proportion must be non-negative");
  return static_cast<std::size_t>(std::floor(proportion * static_cast<double>(n) + 1e-9));
}

void write_selected_set(const std::filesystem::path& path, const SelectedSet& ids) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (auto id : ids) out << id << '\n';
}

SelectedSet read_selected_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  SelectedSet out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      std::size_t used = 0;
      const auto id = std::stoull(line, &used);
      if (used != line.size()) throw std::invalid_argument("trailing");
      out.insert(id);
    } catch (const std::exception&) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad pair id");
    }
  }
  return out;
}

}  // namespace sera
