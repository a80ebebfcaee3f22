#include "sera/experiments.hpp"

#include "sera/errors.hpp"
#include "sera/format.hpp"
#include "sera/random.hpp"

namespace sera {

SyntheticWorld lab_world(const LabSetup& setup) {
  return make_world(setup.vocab_size, setup.sharpness, derive_seed(setup.seed, "world"),
                    setup.prompt_len, setup.max_len, setup.eos_bias);
}

GeneratedDataset lab_dataset(const LabSetup& setup, const SyntheticWorld& world,
                             const LabelPolicy& label) {
  const SampleControls gen{1.0, 1.0, setup.max_len, derive_seed(setup.seed, "offline_pairs")};
  return gen_dataset(world, TabularPolicy::uniform(world.vocab()), setup.n_pairs, label, gen);
}

Lab build_lab(const LabSetup& setup, const LabelPolicy& label) {
  if (setup.n_pairs < 1 || setup.n_eval_prompts < 1) {
    throw PreconditionError("lab needs at least one pair and one evaluation prompt");
  }
  SyntheticWorld world = lab_world(setup);
  GeneratedDataset data = lab_dataset(setup, world, label);
  TabularPolicy sft =
      fit_sft(world.vocab(), chosen_corpus(data.pairs), setup.sft_epochs, setup.sft_lr);
  std::vector<TokenSeq> prompts;
  prompts.reserve(data.pairs.size());
  for (const auto& p : data.pairs) prompts.push_back(p.prompt);
  std::vector<TokenSeq> eval_prompts =
      gen_prompts(world, setup.n_eval_prompts, derive_seed(setup.seed, "eval_prompts"));
  const SampleControls eval{0.7, 0.95, setup.max_len, derive_seed(setup.seed, "eval_sampling")};
  return Lab{std::move(world), std::move(data), std::move(sft), std::move(prompts),
             std::move(eval_prompts), eval};
}

SeraConfig lab_config(const LabSetup& setup, LossVariant variant, std::size_t n_offline) {
  SeraConfig cfg = SeraConfig::defaults(variant, n_offline);
  cfg.batch = setup.batch;
  cfg.lr = setup.lr;
  cfg.bootstrap.controls.max_len = setup.max_len;
  cfg.seed = derive_seed(setup.seed, "train");
  return cfg;
}

double win_rate_vs_sft(const Lab& lab, const TabularPolicy& policy) {
  return win_rate(lab.world, policy, lab.sft, lab.eval_prompts, lab.eval_controls).score;
}

std::vector<SweepRow> mixture_sweep(const Lab& lab, const SeraConfig& base,
                                    std::span<const double> fractions) {
  const std::size_t n = lab.data.pairs.size();
  std::vector<SweepRow> rows;
  for (double f : fractions) {
    SeraConfig cfg = base;
    cfg.k_tilde = proportion_to_count(f, n);
    cfg.k = n - cfg.k_tilde;
    const SeraRun run = run_sera(lab.sft, lab.data.pairs, lab.prompts, cfg);
    rows.push_back(SweepRow{"generated_fraction", f, cfg.k, cfg.k_tilde, cfg.gamma,
                            win_rate(lab.world, run.history.latest(), lab.sft, lab.eval_prompts,
                                     lab.eval_controls)});
  }
  return rows;
}

std::vector<SweepRow> gamma_sweep(const Lab& lab, const SeraConfig& base,
                                  std::span<const double> gammas) {
  std::vector<SweepRow> rows;
  for (double g : gammas) {
    SeraConfig cfg = base;
    cfg.gamma = g;
    const SeraRun run = run_sera(lab.sft, lab.data.pairs, lab.prompts, cfg);
    rows.push_back(SweepRow{"gamma", g, cfg.k, cfg.k_tilde, g,
                            win_rate(lab.world, run.history.latest(), lab.sft, lab.eval_prompts,
                                     lab.eval_controls)});
  }
  return rows;
}

Table sweep_table(std::span<const SweepRow> rows) {
  Table t{{"sweep", "value", "k", "k_tilde", "gamma", "wins", "ties", "losses", "win_rate"}, {}};
  for (const auto& r : rows) {
    t.add_row({r.sweep, format_double(r.value), std::to_string(r.k), std::to_string(r.k_tilde),
               format_double(r.gamma), std::to_string(r.win.wins), std::to_string(r.win.ties),
               std::to_string(r.win.losses), format_double(r.win.score)});
  }
  return t;
}

}  // namespace sera
