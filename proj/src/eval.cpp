#include "sera/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "sera/errors.hpp"
#include "sera/format.hpp"
#include "sera/random.hpp"

namespace sera {

WinRateResult win_rate(const SyntheticWorld& world, const TabularPolicy& a, const TabularPolicy& b,
                       std::span<const TokenSeq> prompts, const SampleControls& controls) {
  if (prompts.empty()) throw PreconditionError("win rate needs at least one prompt");
  WinRateResult r;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    SampleControls c = controls;
    c.seed = derive_seed(controls.seed, "win_rate", {i});
    const double ga = world.gold_reward(prompts[i], sample(a, prompts[i], c));
    const double gb = world.gold_reward(prompts[i], sample(b, prompts[i], c));
    if (std::abs(ga - gb) < kTieThreshold) {
      ++r.ties;
    } else if (ga > gb) {
      ++r.wins;
    } else {
      ++r.losses;
    }
  }
  const double n = static_cast<double>(r.wins + r.ties + r.losses);
  r.score = (static_cast<double>(r.wins) + 0.5 * static_cast<double>(r.ties)) / n;
  return r;
}

CorrelationReport linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw PreconditionError("x and y differ in length");
  if (x.empty()) throw PreconditionError("linear fit of no points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  CorrelationReport rep;
  rep.n = x.size();
  rep.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  rep.intercept = my - rep.slope * mx;
  rep.r_squared = (sxx > 0.0 && syy > 0.0) ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 0.0;
  return rep;
}

RewardCorrelations reward_correlations(const PolicyHistory& history, std::size_t reference_index,
                                       std::span<const PreferencePair> pairs,
                                       const SyntheticWorld& world) {
  if (pairs.size() < 3) throw PreconditionError("correlation analysis needs at least 3 pairs");
  if (reference_index >= history.size()) throw PreconditionError("reference index out of range");
  const TabularPolicy& policy = history.latest();
  const TabularPolicy& ref = history[reference_index];
  std::vector<double> reward, gold, length, margin, gold_margin;
  for (const auto& p : pairs) {
    const double rw = implicit_reward(policy, ref, p.prompt, p.chosen);
    const double rl = implicit_reward(policy, ref, p.prompt, p.rejected);
    const double gw = world.gold_reward(p.prompt, p.chosen);
    const double gl = world.gold_reward(p.prompt, p.rejected);
    reward.push_back(rw);
    gold.push_back(gw);
    length.push_back(static_cast<double>(p.chosen.size()));
    margin.push_back(rw - rl);
    gold_margin.push_back(gw - gl);
  }
  return {linear_fit(gold, reward), linear_fit(length, reward), linear_fit(gold_margin, margin)};
}

AuditSummary selection_audit(std::span<const MarginRecord> records, const SelectedSet& selected,
                             std::span<const AuditFlags> flags) {
  std::unordered_map<std::uint64_t, const AuditFlags*> by_id;
  for (const auto& f : flags) by_id[f.id] = &f;
  std::unordered_map<std::uint64_t, bool> in_records;
  for (const auto& r : records) in_records[r.pair_id] = true;
  for (auto id : selected) {
    if (!in_records.count(id)) throw PreconditionError("selected id " + std::to_string(id) + " has no margin record");
  }

  AuditSummary s;
  std::size_t flip_in = 0, flip_out = 0, len_in = 0, len_out = 0;
  for (const auto& r : records) {
    auto it = by_id.find(r.pair_id);
    if (it == by_id.end()) throw PreconditionError("no audit flags for pair " + std::to_string(r.pair_id));
    const AuditFlags& f = *it->second;
    if (selected.count(r.pair_id)) {
      ++s.n_inside;
      flip_in += f.was_flipped;
      len_in += f.was_length_labeled;
    } else {
      ++s.n_outside;
      flip_out += f.was_flipped;
      len_out += f.was_length_labeled;
    }
  }
  auto frac = [](std::size_t num, std::size_t den) {
    return den ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
  };
  s.flipped_inside = frac(flip_in, s.n_inside);
  s.flipped_outside = frac(flip_out, s.n_outside);
  s.length_inside = frac(len_in, s.n_inside);
  s.length_outside = frac(len_out, s.n_outside);
  s.flipped_global = frac(flip_in + flip_out, s.n_inside + s.n_outside);
  return s;
}

bool VarianceCheck::strictly_lower(double sigmas) const {
  return var_empirical - var_bayes > sigmas * se_difference;
}

bool VarianceCheck::within_bound(double sigmas) const {
  const double rel = var_empirical > 0.0 ? se_empirical / var_empirical : 0.0;
  return var_bayes <= var_empirical * (1.0 + sigmas * rel) + kVarianceFloor;
}

namespace {

struct MomentSummary {
  double variance = 0.0;
  double se = 0.0;
};

// Sample variance and the large-sample standard error of that estimate.
MomentSummary variance_with_se(std::span<const double> v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : v) {
    const double d = (x - mean) * (x - mean);
    m2 += d;
    m4 += d * d;
  }
  const double var = m2 / (n - 1.0);
  m4 /= n;
  const double pop = m2 / n;
  return {var, std::sqrt(std::max(0.0, m4 - pop * pop) / n)};
}

}  // namespace

VarianceCheck variance_lemma_check(const SyntheticWorld& world, const MarginFn& margin_fn,
                                   const VarianceSampling& sampling) {
  if (sampling.n_samples < 10) throw PreconditionError("n_samples must be >= 10");
  if (sampling.n_resamples < 100) throw PreconditionError("n_resamples must be >= 100");
  const TabularPolicy behavior = TabularPolicy::uniform(world.vocab());

  std::vector<double> emp(sampling.n_resamples), bayes(sampling.n_resamples);
  for (std::size_t r = 0; r < sampling.n_resamples; ++r) {
    double se = 0.0, sb = 0.0;
    Rng rng(derive_seed(sampling.seed, "lemma_resample", {r}));
    for (std::size_t i = 0; i < sampling.n_samples; ++i) {
      const TokenSeq x = world.random_prompt(rng);
      const TokenSeq a = sample(behavior, x, sampling.behavior_controls, rng);
      const TokenSeq b = sample(behavior, x, sampling.behavior_controls, rng);

      const double f = margin_fn(x, a, b);
      const double p = world.true_preference(x, a, b);
      const double l_fwd = loss(sampling.loss, f);
      const double l_rev = loss(sampling.loss, -f);
      se += rng.uniform() < p ? l_fwd : l_rev;
      sb += p * l_fwd + (1.0 - p) * l_rev;
    }
    emp[r] = se / static_cast<double>(sampling.n_samples);
    bayes[r] = sb / static_cast<double>(sampling.n_samples);
  }

  const auto me = variance_with_se(emp);
  const auto mb = variance_with_se(bayes);

  double mean_e = 0.0, mean_b = 0.0;
  for (std::size_t r = 0; r < emp.size(); ++r) {
    mean_e += emp[r];
    mean_b += bayes[r];
  }
  mean_e /= static_cast<double>(emp.size());
  mean_b /= static_cast<double>(bayes.size());
  std::vector<double> d(emp.size());
  for (std::size_t r = 0; r < emp.size(); ++r) {
    d[r] = (emp[r] - mean_e) * (emp[r] - mean_e) - (bayes[r] - mean_b) * (bayes[r] - mean_b);
  }
  const auto md = variance_with_se(d);

  VarianceCheck out;
  out.var_empirical = me.variance;
  out.var_bayes = mb.variance;
  out.se_empirical = me.se;
  out.se_bayes = mb.se;
  out.se_difference = std::sqrt(md.variance / static_cast<double>(d.size()));
  out.n_resamples = sampling.n_resamples;
  return out;
}

std::vector<std::vector<double>> jaccard_matrix(std::span<const SelectedSet> sets) {
  std::vector<std::vector<double>> m(sets.size(), std::vector<double>(sets.size(), 1.0));
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (std::size_t j = i + 1; j < sets.size(); ++j) m[i][j] = m[j][i] = jaccard(sets[i], sets[j]);
  }
  return m;
}

void Table::add_row(std::vector<std::string> row) {
  if (row.size() != header.size()) throw PreconditionError("row width does not match header");
  rows.push_back(std::move(row));
}

void write_table(const std::filesystem::path& path, const Table& table) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].find_first_of("\t\n") != std::string::npos) {
        throw PreconditionError("table cell contains a delimiter: " + cells[i]);
      }
      if (i) out << '\t';
      out << cells[i];
    }
    out << '\n';
  };
  line(table.header);
  for (const auto& r : table.rows) line(r);
  if (!out) throw IoError("write failed: " + path.string());
}

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const auto tab = s.find('\t', start);
      cells.push_back(s.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    return cells;
  };
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": missing header");
  t.header = split(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    auto cells = split(line);
    if (cells.size() != t.header.size()) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": wrong column count");
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

Table win_rate_table(std::span<const std::string> labels, std::span<const WinRateResult> results) {
  if (labels.size() != results.size()) throw PreconditionError("label count mismatch");
  Table t{{"comparison", "wins", "ties", "losses", "score"}, {}};
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    t.add_row({labels[i], std::to_string(r.wins), std::to_string(r.ties), std::to_string(r.losses),
               format_double(r.score)});
  }
  return t;
}

Table jaccard_table(std::span<const std::string> labels,
                    const std::vector<std::vector<double>>& matrix) {
  if (labels.size() != matrix.size()) throw PreconditionError("label count mismatch");
  Table t;
  t.header.push_back("set");
  for (const auto& l : labels) t.header.push_back(l);
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    std::vector<std::string> row{labels[i]};
    for (double v : matrix[i]) row.push_back(format_double(v));
    t.add_row(std::move(row));
  }
  return t;
}

Table correlation_table(std::span<const std::string> labels,
                        std::span<const RewardCorrelations> results) {
  if (labels.size() != results.size()) throw PreconditionError("label count mismatch");
  Table t{{"run", "r2_gold", "slope_gold", "r2_length", "slope_length", "r2_margin", "n"}, {}};
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    t.add_row({labels[i], format_double(r.vs_gold.r_squared), format_double(r.vs_gold.slope),
               format_double(r.vs_length.r_squared), format_double(r.vs_length.slope),
               format_double(r.margin_vs_gold_margin.r_squared), std::to_string(r.vs_gold.n)});
  }
  return t;
}

std::vector<std::filesystem::path> emit_report(std::span<const NamedTable> tables,
                                               const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  for (const auto& nt : tables) {
    const auto path = dir / (nt.name + ".tsv");
    write_table(path, nt.table);
    written.push_back(path);
  }
  return written;
}

}  // namespace sera
