#include "sera/synthdata.hpp"

#include <cmath>
#include <fstream>
#include <string>
#include <unordered_set>
#include <utility>

#include "sera/errors.hpp"
#include "sera/random.hpp"

namespace sera {

double SyntheticWorld::gold_reward(const TokenSeq& prompt, const TokenSeq& response) const {
  return log_prob(gold, prompt, response);
}

double SyntheticWorld::true_preference(const TokenSeq& prompt, const TokenSeq& a,
                                       const TokenSeq& b) const {
  return sigmoid(gold_reward(prompt, a) - gold_reward(prompt, b));
}

TokenSeq SyntheticWorld::random_prompt(std::uint64_t s) const {
  Rng rng(s);
  return random_prompt(rng);
}

TokenSeq SyntheticWorld::random_prompt(Rng& rng) const {
  TokenSeq p(static_cast<std::size_t>(prompt_len));
  for (auto& t : p) t = static_cast<Token>(rng.below(static_cast<std::size_t>(vocab().size)));
  return p;
}

SyntheticWorld make_world(int vocab_size, double sharpness, std::uint64_t seed, int prompt_len,
                          int response_len_max, double eos_bias) {
  if (!(sharpness >= 0.0)) throw PreconditionError("sharpness must be non-negative");
  if (prompt_len < 1) throw PreconditionError("prompt_len must be >= 1");
  if (response_len_max < 1) throw PreconditionError("response_len_max must be >= 1");
  Vocab vocab(vocab_size);
  Matrix logits(vocab.rows(), vocab.cols());
  Rng rng(derive_seed(seed, "gold"));
  for (double& x : logits.flat()) x = sharpness * rng.normal() + 0.0;
  if (!std::isfinite(eos_bias)) throw PreconditionError("eos_bias must be finite");
  for (std::size_t r = 0; r < vocab.rows(); ++r) logits(r, vocab.col_of(vocab.eos())) += eos_bias;
  return SyntheticWorld{TabularPolicy(vocab, std::move(logits)), prompt_len, response_len_max,
                        sharpness, eos_bias, seed};
}

void LabelPolicy::validate() const {
  auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in_unit(flip_rate)) throw ConfigError("flip_rate must lie in [0, 1]");
  if (!in_unit(length_bias_rate)) throw ConfigError("length_bias_rate must lie in [0, 1]");
}

namespace {

constexpr int kDistinctAttempts = 16;

}  // namespace

GeneratedDataset gen_dataset(const SyntheticWorld& world, const TabularPolicy& behavior,
                             std::size_t n_pairs, const LabelPolicy& label,
                             const SampleControls& controls) {
  if (n_pairs < 1) throw PreconditionError("n_pairs must be >= 1");
  if (behavior.vocab() != world.vocab()) throw DomainError("behavior policy vocab differs from world");
  label.validate();
  controls.validate();

  GeneratedDataset out;
  out.pairs.reserve(n_pairs);
  out.audit.reserve(n_pairs);
  const std::size_t max_slots = 4 * n_pairs + 16;
  for (std::size_t slot = 0; slot < max_slots && out.pairs.size() < n_pairs; ++slot) {
    TokenSeq prompt, a, b;
    bool ok = false;
    for (int attempt = 0; attempt < kDistinctAttempts && !ok; ++attempt) {
      const std::initializer_list<std::uint64_t> coords{slot, static_cast<std::uint64_t>(attempt)};
      prompt = world.random_prompt(derive_seed(controls.seed, "prompt", coords));
      SampleControls c = controls;
      c.seed = derive_seed(controls.seed, "response_a", coords);
      a = sample(behavior, prompt, c);
      c.seed = derive_seed(controls.seed, "response_b", coords);
      b = sample(behavior, prompt, c);
      ok = a != b;
    }
    if (!ok) continue;

    Rng rng(derive_seed(controls.seed, "label", {slot}));
    const double u_pref = rng.uniform();
    const double u_flip = rng.uniform();
    const double u_len = rng.uniform();

    const double ga = world.gold_reward(prompt, a);
    const double gb = world.gold_reward(prompt, b);
    const bool a_wins = label.stochastic_labels ? u_pref < sigmoid(ga - gb) : ga >= gb;
    if (!a_wins) std::swap(a, b);

    AuditFlags flags;
    flags.id = out.pairs.size();
    if (u_flip < label.flip_rate) {
      std::swap(a, b);
      flags.was_flipped = true;
    } else if (u_len < label.length_bias_rate) {
      flags.was_length_labeled = true;
      if (b.size() > a.size()) std::swap(a, b);
    }
    flags.gold_chosen = world.gold_reward(prompt, a);
    flags.gold_rejected = world.gold_reward(prompt, b);
    out.pairs.push_back(PreferencePair{std::move(prompt), std::move(a), std::move(b), flags.id});
    out.audit.push_back(flags);
  }
  if (out.pairs.size() < n_pairs) {
    throw EmptyResultError("only " + std::to_string(out.pairs.size()) + " of " +
                           std::to_string(n_pairs) + " distinct pairs could be generated");
  }
  return out;
}

void flip_labels(GeneratedDataset& data, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw PreconditionError("flip rate must lie in [0, 1]");
  for (std::size_t i = 0; i < data.pairs.size(); ++i) {
    Rng rng(derive_seed(seed, "flip", {data.pairs[i].id}));
    if (rng.uniform() < rate) {
      std::swap(data.pairs[i].chosen, data.pairs[i].rejected);
      if (i < data.audit.size()) {
        auto& f = data.audit[i];
        f.was_flipped = !f.was_flipped;
        std::swap(f.gold_chosen, f.gold_rejected);
      }
    }
  }
}

std::vector<TokenSeq> gen_prompts(const SyntheticWorld& world, std::size_t n, std::uint64_t seed) {
  std::vector<TokenSeq> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(world.random_prompt(derive_seed(seed, "eval_prompt", {i})));
  return out;
}

std::vector<SftExample> chosen_corpus(std::span<const PreferencePair> pairs) {
  std::vector<SftExample> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(SftExample{p.prompt, p.chosen});
  return out;
}

void write_jsonl(const std::filesystem::path& path, std::span<const PreferencePair> pairs,
                 std::span<const nlohmann::json> meta) {
  if (!meta.empty() && meta.size() != pairs.size()) {
    throw PreconditionError("metadata count does not match pair count");
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    nlohmann::ordered_json j;
    j["id"] = pairs[i].id;
    j["prompt"] = pairs[i].prompt;
    j["chosen"] = pairs[i].chosen;
    j["rejected"] = pairs[i].rejected;
    j["meta"] = meta.empty() ? nlohmann::json::object() : meta[i];
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

namespace {

TokenSeq token_array(const nlohmann::json& j, const char* field) {
  if (!j.contains(field) || !j[field].is_array()) {
    throw std::invalid_argument(std::string("missing array field '") + field + "'");
  }
  TokenSeq out;
  for (const auto& t : j[field]) {
    if (!t.is_number_integer() || t.get<long long>() < 0) {
      throw std::invalid_argument(std::string("non-token entry in '") + field + "'");
    }
    out.push_back(t.get<Token>());
  }
  return out;
}

}  // namespace

std::vector<JsonlRecord> read_jsonl_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<JsonlRecord> out;
  std::unordered_set<std::uint64_t> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
    JsonlRecord rec;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!j.is_object()) throw std::invalid_argument("not a JSON object");
      if (!j.contains("id") || !j["id"].is_number_unsigned()) {
        throw std::invalid_argument("missing unsigned field 'id'");
      }
      rec.pair.id = j["id"].get<std::uint64_t>();
      rec.pair.prompt = token_array(j, "prompt");
      rec.pair.chosen = token_array(j, "chosen");
      rec.pair.rejected = token_array(j, "rejected");
      rec.meta = j.contains("meta") ? j["meta"] : nlohmann::json::object();
    } catch (const std::exception& e) {
      throw IoError(where + e.what());
    }
    if (rec.pair.chosen.empty() || rec.pair.rejected.empty()) throw IoError(where + "empty response");
    if (rec.pair.chosen == rec.pair.rejected) throw IoError(where + "chosen equals rejected");
    if (!seen.insert(rec.pair.id).second) {
      throw IoError(where + "duplicate id " + std::to_string(rec.pair.id));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<PreferencePair> read_jsonl(const std::filesystem::path& path) {
  std::vector<PreferencePair> out;
  for (auto& r : read_jsonl_records(path)) out.push_back(std::move(r.pair));
  return out;
}

void write_audit(const std::filesystem::path& path, std::span<const AuditFlags> audit) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& f : audit) {
    nlohmann::ordered_json j;
    j["id"] = f.id;
    j["was_flipped"] = f.was_flipped;
    j["was_length_labeled"] = f.was_length_labeled;
    j["gold_chosen"] = f.gold_chosen;
    j["gold_rejected"] = f.gold_rejected;
    out << j.dump() << '\n';
  }
}

std::vector<AuditFlags> read_audit(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<AuditFlags> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back(AuditFlags{j.at("id").get<std::uint64_t>(), j.at("was_flipped").get<bool>(),
                               j.at("was_length_labeled").get<bool>(),
                               j.at("gold_chosen").get<double>(), j.at("gold_rejected").get<double>()});
    } catch (const std::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace sera
