#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sera/eval.hpp"
#include "sera/synthdata.hpp"
#include "sera/trainer.hpp"

namespace sera {

// Settings of the synthetic laboratory used by the sweeps and the directional
// checks. The gold model gets a strong eos penalty so that gold preferences
// are close to length-neutral and response length stays a spurious feature.
struct LabSetup {
  int vocab_size = 8;
  double sharpness = 2.0;
  double eos_bias = -12.0;
  int prompt_len = 2;
  int max_len = 6;
  std::size_t n_pairs = 2000;
  std::size_t n_eval_prompts = 2000;
  int sft_epochs = 100;
  double sft_lr = 1.0;
  std::size_t batch = 16;
  double lr = 0.01;
  std::uint64_t seed = 0;
};

struct Lab {
  SyntheticWorld world;
  GeneratedDataset data;
  TabularPolicy sft;
  // Prompts of the offline pairs, reused for bootstrapping.
  std::vector<TokenSeq> prompts;
  std::vector<TokenSeq> eval_prompts;
  SampleControls eval_controls;
};

SyntheticWorld lab_world(const LabSetup& setup);

// Offline pairs sampled from the uniform policy with seeds derived from setup.seed.
GeneratedDataset lab_dataset(const LabSetup& setup, const SyntheticWorld& world,
                             const LabelPolicy& label);

// World, offline pairs sampled from the uniform policy, SFT on the chosen
// responses, and held-out evaluation prompts.
Lab build_lab(const LabSetup& setup, const LabelPolicy& label);

// SeraConfig::defaults plus the lab's batch, learning rate, length limit and seed.
SeraConfig lab_config(const LabSetup& setup, LossVariant variant, std::size_t n_offline);

double win_rate_vs_sft(const Lab& lab, const TabularPolicy& policy);

struct SweepRow {
  std::string sweep;
  double value = 0.0;
  std::size_t k = 0;
  std::size_t k_tilde = 0;
  double gamma = 0.0;
  WinRateResult win;
};

// One run per generated fraction f: k_tilde = floor(f N), k = N - k_tilde.
std::vector<SweepRow> mixture_sweep(const Lab& lab, const SeraConfig& base,
                                    std::span<const double> fractions);
std::vector<SweepRow> gamma_sweep(const Lab& lab, const SeraConfig& base,
                                  std::span<const double> gammas);

Table sweep_table(std::span<const SweepRow> rows);

inline constexpr double kMixtureFractions[] = {0.0, 0.3, 0.5, 0.7, 1.0};
inline constexpr double kGammaGrid[] = {0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0};

}  // namespace sera
