#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <functional>
#include <vector>

#include "sera/daa_losses.hpp"
#include "sera/policy.hpp"
#include "sera/random.hpp"

namespace sera::test {

inline TabularPolicy random_policy(int v, double scale, Rng& rng) {
  Vocab vocab(v);
  Matrix m(vocab.rows(), vocab.cols());
  for (double& x : m.flat()) x = scale * rng.normal();
  return TabularPolicy(vocab, std::move(m));
}

inline TokenSeq random_tokens(const Vocab& v, int len, Rng& rng) {
  TokenSeq out;
  for (int i = 0; i < len; ++i) out.push_back(static_cast<Token>(rng.below(static_cast<std::size_t>(v.size))));
  return out;
}

inline TokenSeq random_response(const Vocab& v, int len, Rng& rng) {
  TokenSeq out = random_tokens(v, len, rng);
  if (rng.uniform() < 0.5) out.back() = v.eos();
  return out;
}

// Policy whose row `row` puts probability p on column `col` and spreads the
// rest evenly; other rows are uniform.
inline TabularPolicy single_entry_policy(int v, std::size_t row, std::size_t col, double p) {
  Vocab vocab(v);
  Matrix m(vocab.rows(), vocab.cols());
  m(row, col) = std::log(p / (1.0 - p) * static_cast<double>(vocab.cols() - 1));
  return TabularPolicy(vocab, std::move(m));
}

// Policy whose row `row` has exactly the given column probabilities; other
// rows are uniform.
inline TabularPolicy row_policy(int v, std::size_t row, const std::vector<double>& probs) {
  Vocab vocab(v);
  Matrix m(vocab.rows(), vocab.cols());
  for (std::size_t c = 0; c < probs.size(); ++c) m(row, c) = std::log(probs[c]);
  return TabularPolicy(vocab, std::move(m));
}

inline Matrix finite_difference(const TabularPolicy& p, const std::function<double(const TabularPolicy&)>& f,
                                double h = 1e-5) {
  Matrix g(p.logits().rows(), p.logits().cols());
  for (std::size_t i = 0; i < g.size(); ++i) {
    Matrix up = p.logits(), dn = p.logits();
    up.flat()[i] += h;
    dn.flat()[i] -= h;
    g.flat()[i] = (f(TabularPolicy(p.vocab(), up)) - f(TabularPolicy(p.vocab(), dn))) / (2.0 * h);
  }
  return g;
}

inline double relative_error(const Matrix& a, const Matrix& b) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a.flat()[i] - b.flat()[i]));
    scale = std::max({scale, std::abs(a.flat()[i]), std::abs(b.flat()[i])});
  }
  return scale < 1e-12 ? diff : diff / scale;
}

// Every response of length <= max_len: eos-terminated ones plus the
// length-max_len ones cut off without eos.
inline std::vector<TokenSeq> all_responses(const Vocab& v, int max_len) {
  std::vector<TokenSeq> out;
  std::vector<TokenSeq> frontier{{}};
  for (int len = 1; len <= max_len; ++len) {
    std::vector<TokenSeq> next;
    for (const auto& prefix : frontier) {
      TokenSeq ended = prefix;
      ended.push_back(v.eos());
      out.push_back(ended);
      for (Token t = 0; t < v.size; ++t) {
        TokenSeq cont = prefix;
        cont.push_back(t);
        next.push_back(cont);
      }
    }
    frontier = std::move(next);
  }
  out.insert(out.end(), frontier.begin(), frontier.end());
  return out;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("sera_unit_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

}  // namespace sera::test
