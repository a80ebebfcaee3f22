#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "sera/random.hpp"

namespace sera {

using Token = std::int32_t;

// Prompt or response tokens. bos is never stored; eos may only appear last.
using TokenSeq = std::vector<Token>;

// Regular tokens occupy [0, size); bos and eos sit just past the range.
struct Vocab {
  int size = 0;

  explicit Vocab(int regular_tokens);

  Token bos() const { return size; }
  Token eos() const { return size + 1; }

  // Logit table shape: one row per context (regular tokens + bos), one column
  // per next token (regular tokens + eos).
  std::size_t rows() const { return static_cast<std::size_t>(size) + 1; }
  std::size_t cols() const { return static_cast<std::size_t>(size) + 1; }

  bool is_regular(Token t) const { return t >= 0 && t < size; }
  std::size_t row_of(Token context) const;
  std::size_t col_of(Token next) const;
  Token token_of_col(std::size_t col) const;

  friend bool operator==(const Vocab&, const Vocab&) = default;
};

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  // this += scale * other
  void add_scaled(const Matrix& other, double scale);

  double max_abs() const;
  double frobenius_norm() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Bigram softmax policy. Immutable; the per-row log-softmax is cached at
// construction so scoring never renormalizes.
class TabularPolicy {
 public:
  TabularPolicy(Vocab vocab, Matrix logits);

  static TabularPolicy uniform(Vocab vocab);

  const Vocab& vocab() const { return vocab_; }
  const Matrix& logits() const { return logits_; }

  // log p(next | context), tokens in model coordinates (context may be bos,
  // next may be eos).
  double log_prob_next(Token context, Token next) const {
    return log_probs_(vocab_.row_of(context), vocab_.col_of(next));
  }
  std::span<const double> log_prob_row(std::size_t row) const { return log_probs_.row(row); }

  friend bool operator==(const TabularPolicy& a, const TabularPolicy& b) {
    return a.vocab_ == b.vocab_ && a.logits_ == b.logits_;
  }

 private:
  Vocab vocab_;
  Matrix logits_;
  Matrix log_probs_;
};

// Throws DomainError naming the offending position.
void validate_prompt(const Vocab& vocab, const TokenSeq& prompt);
void validate_response(const Vocab& vocab, const TokenSeq& response);

// Context row used for the first response token.
Token initial_context(const Vocab& vocab, const TokenSeq& prompt);

double log_prob(const TabularPolicy& policy, const TokenSeq& prompt, const TokenSeq& response);

// Exact gradient of log_prob with respect to the logit table.
Matrix log_prob_grad(const TabularPolicy& policy, const TokenSeq& prompt, const TokenSeq& response);

// grad += scale * d log_prob / d logits, without allocating.
void accumulate_log_prob_grad(const TabularPolicy& policy, const TokenSeq& prompt,
                              const TokenSeq& response, double scale, Matrix& grad);

struct SampleControls {
  double temperature = 0.7;
  double top_p = 0.95;
  int max_len = 6;
  std::uint64_t seed = 0;

  void validate() const;
};

// Temperature-scaled, nucleus-truncated, renormalized distribution over one
// logit row. Tokens are ranked by probability (ties by index) and the
// smallest prefix whose mass reaches top_p is kept.
std::vector<double> nucleus_distribution(std::span<const double> logits, double temperature,
                                         double top_p);

TokenSeq sample(const TabularPolicy& policy, const TokenSeq& prompt, const SampleControls& controls);
// Draws from the caller's generator; controls.seed is ignored.
TokenSeq sample(const TabularPolicy& policy, const TokenSeq& prompt, const SampleControls& controls,
                Rng& rng);

struct SftExample {
  TokenSeq prompt;
  TokenSeq response;
};

double mean_log_likelihood(const TabularPolicy& policy, std::span<const SftExample> corpus);

// Full-batch gradient ascent on mean response log-likelihood from zero logits.
TabularPolicy fit_sft(const Vocab& vocab, std::span<const SftExample> corpus, int epochs, double lr);

// Text serialization: vocab size on the first line, then the logit table one
// row per line. Doubles are written in shortest round-trip form.
void write_policy(std::ostream& out, const TabularPolicy& policy);
TabularPolicy read_policy(std::istream& in);
void save_policy(const std::filesystem::path& path, const TabularPolicy& policy);
TabularPolicy load_policy(const std::filesystem::path& path);

}  // namespace sera
