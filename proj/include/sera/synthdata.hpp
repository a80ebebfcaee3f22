#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "sera/daa_losses.hpp"
#include "sera/policy.hpp"

namespace sera {

// Hidden ground truth. The gold model's log-likelihood is the gold reward, so
// the true preference p*(a > b | x) = sigma(g(x, a) - g(x, b)) is a
// Bradley-Terry model by construction.
struct SyntheticWorld {
  TabularPolicy gold;
  int prompt_len = 2;
  int response_len_max = 6;
  double sharpness = 0.0;
  double eos_bias = 0.0;
  std::uint64_t seed = 0;

  const Vocab& vocab() const { return gold.vocab(); }
  double gold_reward(const TokenSeq& prompt, const TokenSeq& response) const;
  double true_preference(const TokenSeq& prompt, const TokenSeq& a, const TokenSeq& b) const;
  TokenSeq random_prompt(std::uint64_t seed) const;
  TokenSeq random_prompt(Rng& rng) const;
};

// Gold logits are i.i.d. N(0, sharpness^2); eos_bias is added to the eos
// column and shifts how strongly the gold model favors short responses.
SyntheticWorld make_world(int vocab_size, double sharpness, std::uint64_t seed, int prompt_len = 2,
                          int response_len_max = 6, double eos_bias = 0.0);

struct LabelPolicy {
  double flip_rate = 0.0;
  double length_bias_rate = 0.0;
  bool stochastic_labels = false;

  void validate() const;
};

// Provenance of one generated pair. Lives beside the dataset, never inside it.
struct AuditFlags {
  std::uint64_t id = 0;
  bool was_flipped = false;
  bool was_length_labeled = false;
  double gold_chosen = 0.0;
  double gold_rejected = 0.0;
};

struct GeneratedDataset {
  std::vector<PreferencePair> pairs;
  std::vector<AuditFlags> audit;
};

// Samples two distinct responses per random prompt from the behavior policy,
// orders them by gold reward (or a Bernoulli draw of p* when labels are
// stochastic), then flips with probability flip_rate or, failing that,
// prefers the longer response with probability length_bias_rate.
GeneratedDataset gen_dataset(const SyntheticWorld& world, const TabularPolicy& behavior,
                             std::size_t n_pairs, const LabelPolicy& label,
                             const SampleControls& controls);

// Swaps chosen/rejected of each pair with probability rate, toggling the
// audit flag. Two passes at rate 1 restore the input.
void flip_labels(GeneratedDataset& data, double rate, std::uint64_t seed);

std::vector<TokenSeq> gen_prompts(const SyntheticWorld& world, std::size_t n, std::uint64_t seed);

std::vector<SftExample> chosen_corpus(std::span<const PreferencePair> pairs);

// JSONL: one {"id","prompt","chosen","rejected","meta"} object per line.
void write_jsonl(const std::filesystem::path& path, std::span<const PreferencePair> pairs,
                 std::span<const nlohmann::json> meta = {});

struct JsonlRecord {
  PreferencePair pair;
  nlohmann::json meta;
};

std::vector<JsonlRecord> read_jsonl_records(const std::filesystem::path& path);
std::vector<PreferencePair> read_jsonl(const std::filesystem::path& path);

// Sidecar: one JSON object per line keyed by the dataset's ids.
void write_audit(const std::filesystem::path& path, std::span<const AuditFlags> audit);
std::vector<AuditFlags> read_audit(const std::filesystem::path& path);

}  // namespace sera
