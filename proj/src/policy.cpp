#include "sera/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "sera/errors.hpp"
#include "sera/format.hpp"
#include "sera/random.hpp"

namespace sera {

Vocab::Vocab(int regular_tokens) : size(regular_tokens) {
  if (regular_tokens < 2) throw PreconditionError("vocab size must be >= 2");
}

std::size_t Vocab::row_of(Token context) const {
  if (is_regular(context)) return static_cast<std::size_t>(context);
  if (context == bos()) return static_cast<std::size_t>(size);
  throw DomainError("token " + std::to_string(context) + " is not a valid context");
}

std::size_t Vocab::col_of(Token next) const {
  if (is_regular(next)) return static_cast<std::size_t>(next);
  if (next == eos()) return static_cast<std::size_t>(size);
  throw DomainError("token " + std::to_string(next) + " is not a valid next token");
}

Token Vocab::token_of_col(std::size_t col) const {
  return col == static_cast<std::size_t>(size) ? eos() : static_cast<Token>(col);
}

void Matrix::add_scaled(const Matrix& other, double scale) {
  if (!same_shape(other)) throw PreconditionError("matrix shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += scale * other.data_[i];
}

double Matrix::max_abs() const {
  double m = 0.0;
  for (double x : data_) m = std::max(m, std::abs(x));
  return m;
}

double Matrix::frobenius_norm() const {
  double s = 0.0;
  for (double x : data_) s += x * x;
  return std::sqrt(s);
}

namespace {

void log_softmax_row(std::span<const double> in, std::span<double> out) {
  const double mx = *std::max_element(in.begin(), in.end());
  double z = 0.0;
  for (double x : in) z += std::exp(x - mx);
  const double lz = mx + std::log(z);
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] - lz;
}

}  // namespace

TabularPolicy::TabularPolicy(Vocab vocab, Matrix logits)
    : vocab_(vocab), logits_(std::move(logits)), log_probs_(vocab_.rows(), vocab_.cols()) {
  if (logits_.rows() != vocab_.rows() || logits_.cols() != vocab_.cols()) {
    throw PreconditionError("logit table shape does not match vocab");
  }
  for (double x : logits_.flat()) {
    if (!std::isfinite(x)) throw DomainError("policy logits must be finite");
  }
  for (std::size_t r = 0; r < vocab_.rows(); ++r) log_softmax_row(logits_.row(r), log_probs_.row(r));
}

TabularPolicy TabularPolicy::uniform(Vocab vocab) {
  return TabularPolicy(vocab, Matrix(vocab.rows(), vocab.cols()));
}

void validate_prompt(const Vocab& vocab, const TokenSeq& prompt) {
  for (std::size_t i = 0; i < prompt.size(); ++i) {
    if (!vocab.is_regular(prompt[i])) {
      throw DomainError("invalid prompt token " + std::to_string(prompt[i]) + " at position " +
                        std::to_string(i));
    }
  }
}

void validate_response(const Vocab& vocab, const TokenSeq& response) {
  if (response.empty()) throw PreconditionError("response must be non-empty");
  for (std::size_t i = 0; i < response.size(); ++i) {
    const Token t = response[i];
    const bool last = i + 1 == response.size();
    if (vocab.is_regular(t) || (t == vocab.eos() && last)) continue;
    throw DomainError("invalid response token " + std::to_string(t) + " at position " +
                      std::to_string(i));
  }
}

Token initial_context(const Vocab& vocab, const TokenSeq& prompt) {
  return prompt.empty() ? vocab.bos() : prompt.back();
}

double log_prob(const TabularPolicy& policy, const TokenSeq& prompt, const TokenSeq& response) {
  const Vocab& v = policy.vocab();
  validate_prompt(v, prompt);
  validate_response(v, response);
  Token ctx = initial_context(v, prompt);
  double lp = 0.0;
  for (Token t : response) {
    lp += policy.log_prob_next(ctx, t);
    ctx = t;
  }
  return lp;
}

void accumulate_log_prob_grad(const TabularPolicy& policy, const TokenSeq& prompt,
                              const TokenSeq& response, double scale, Matrix& grad) {
  const Vocab& v = policy.vocab();
  validate_prompt(v, prompt);
  validate_response(v, response);
  if (grad.rows() != v.rows() || grad.cols() != v.cols()) {
    throw PreconditionError("gradient buffer shape does not match vocab");
  }
  Token ctx = initial_context(v, prompt);
  for (Token t : response) {
    const std::size_t r = v.row_of(ctx);
    auto lp = policy.log_prob_row(r);
    auto g = grad.row(r);
    for (std::size_t c = 0; c < g.size(); ++c) g[c] -= scale * std::exp(lp[c]);
    g[v.col_of(t)] += scale;
    ctx = t;
  }
}

Matrix log_prob_grad(const TabularPolicy& policy, const TokenSeq& prompt, const TokenSeq& response) {
  Matrix grad(policy.vocab().rows(), policy.vocab().cols());
  accumulate_log_prob_grad(policy, prompt, response, 1.0, grad);
  return grad;
}

void SampleControls::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw PreconditionError("temperature must be positive");
  }
  if (!(top_p > 0.0 && top_p <= 1.0)) throw PreconditionError("top_p must lie in (0, 1]");
  if (max_len < 1) throw PreconditionError("max_len must be >= 1");
}

std::vector<double> nucleus_distribution(std::span<const double> logits, double temperature,
                                         double top_p) {
  const std::size_t n = logits.size();
  std::vector<double> probs(n);
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    probs[i] = std::exp((logits[i] - mx) / temperature);
    z += probs[i];
  }
  for (double& p : probs) p /= z;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });

  // Inclusive prefix: the token at which cumulative mass reaches top_p stays.
  double mass = 0.0;
  std::size_t keep = 0;
  while (keep < n) {
    mass += probs[order[keep]];
    ++keep;
    if (mass >= top_p) break;
  }
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < keep; ++i) out[order[i]] = probs[order[i]] / mass;
  return out;
}

TokenSeq sample(const TabularPolicy& policy, const TokenSeq& prompt, const SampleControls& controls) {
  Rng rng(controls.seed);
  return sample(policy, prompt, controls, rng);
}

TokenSeq sample(const TabularPolicy& policy, const TokenSeq& prompt, const SampleControls& controls,
                Rng& rng) {
  controls.validate();
  const Vocab& v = policy.vocab();
  validate_prompt(v, prompt);
  TokenSeq out;
  Token ctx = initial_context(v, prompt);
  while (static_cast<int>(out.size()) < controls.max_len) {
    const auto dist = nucleus_distribution(policy.logits().row(v.row_of(ctx)),
                                           controls.temperature, controls.top_p);
    const double u = rng.uniform();
    std::size_t pick = dist.size();
    double acc = 0.0;
    for (std::size_t c = 0; c < dist.size(); ++c) {
      if (dist[c] == 0.0) continue;
      pick = c;
      acc += dist[c];
      if (u < acc) break;
    }
    const Token t = v.token_of_col(pick);
    out.push_back(t);
    if (t == v.eos()) break;
    ctx = t;
  }
  return out;
}

double mean_log_likelihood(const TabularPolicy& policy, std::span<const SftExample> corpus) {
  if (corpus.empty()) throw PreconditionError("corpus must be non-empty");
  double s = 0.0;
  for (const auto& ex : corpus) s += log_prob(policy, ex.prompt, ex.response);
  return s / static_cast<double>(corpus.size());
}

TabularPolicy fit_sft(const Vocab& vocab, std::span<const SftExample> corpus, int epochs, double lr) {
  if (corpus.empty()) throw PreconditionError("SFT corpus must be non-empty");
  if (epochs < 0) throw PreconditionError("epochs must be non-negative");
  if (!(lr > 0.0)) throw PreconditionError("lr must be positive");
  TabularPolicy policy = TabularPolicy::uniform(vocab);
  const double scale = 1.0 / static_cast<double>(corpus.size());
  for (int e = 0; e < epochs; ++e) {
    Matrix grad(vocab.rows(), vocab.cols());
    for (const auto& ex : corpus) accumulate_log_prob_grad(policy, ex.prompt, ex.response, scale, grad);
    Matrix next = policy.logits();
    next.add_scaled(grad, lr);
    policy = TabularPolicy(vocab, std::move(next));
  }
  return policy;
}

void write_policy(std::ostream& out, const TabularPolicy& policy) {
  const Matrix& m = policy.logits();
  out << policy.vocab().size << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out << ' ';
      out << format_double(m(r, c));
    }
    out << '\n';
  }
}

TabularPolicy read_policy(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw IoError("policy file is empty");
  const int size = static_cast<int>(parse_double(tok));
  if (size < 2 || std::to_string(size) != tok) throw IoError("bad vocab size '" + tok + "'");
  Vocab vocab(size);
  Matrix logits(vocab.rows(), vocab.cols());
  for (double& x : logits.flat()) {
    if (!(in >> tok)) throw IoError("policy file truncated");
    x = parse_double(tok);
  }
  if (in >> tok) throw IoError("trailing data in policy file");
  return TabularPolicy(vocab, std::move(logits));
}

void save_policy(const std::filesystem::path& path, const TabularPolicy& policy) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_policy(out, policy);
  if (!out) throw IoError("write failed: " + path.string());
}

TabularPolicy load_policy(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  return read_policy(in);
}

}  // namespace sera
