#include "sera/daa_losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sera/errors.hpp"

namespace sera {

void validate_pair(const Vocab& vocab, const PreferencePair& pair) {
  validate_prompt(vocab, pair.prompt);
  validate_response(vocab, pair.chosen);
  validate_response(vocab, pair.rejected);
  if (pair.chosen == pair.rejected) {
    throw DomainError("pair " + std::to_string(pair.id) + " has identical chosen and rejected");
  }
}

std::string_view to_string(LossVariant v) {
  switch (v) {
    case LossVariant::Dpo: return "dpo";
    case LossVariant::Ipo: return "ipo";
    case LossVariant::Slic: return "slic";
    case LossVariant::Simpo: return "simpo";
  }
  return "?";
}

LossVariant parse_loss_variant(std::string_view name) {
  if (name == "dpo") return LossVariant::Dpo;
  if (name == "ipo") return LossVariant::Ipo;
  if (name == "slic") return LossVariant::Slic;
  if (name == "simpo") return LossVariant::Simpo;
  throw ConfigError("unknown loss '" + std::string(name) + "'");
}

void LossKind::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be positive");
}

double default_beta(LossVariant v) { return v == LossVariant::Ipo ? 1.0 : 0.2; }

namespace {

void check_same_vocab(const TabularPolicy& a, const TabularPolicy& b) {
  if (a.vocab() != b.vocab()) {
    throw DomainError("vocab mismatch: " + std::to_string(a.vocab().size) + " vs " +
                      std::to_string(b.vocab().size));
  }
}

double response_length(const TokenSeq& response) {
  if (response.empty()) throw PreconditionError("response must be non-empty");
  return static_cast<double>(response.size());
}

}  // namespace

double implicit_reward(const TabularPolicy& policy, const TabularPolicy& reference,
                       const TokenSeq& prompt, const TokenSeq& response) {
  check_same_vocab(policy, reference);
  return log_prob(policy, prompt, response) - log_prob(reference, prompt, response);
}

double simpo_reward(const TabularPolicy& policy, const TokenSeq& prompt, const TokenSeq& response,
                    double beta) {
  const double len = response_length(response);
  return beta / len * log_prob(policy, prompt, response);
}

double irm(const TabularPolicy& policy, const TabularPolicy& reference, const PreferencePair& pair) {
  return implicit_reward(policy, reference, pair.prompt, pair.chosen) -
         implicit_reward(policy, reference, pair.prompt, pair.rejected);
}

double loss_margin(const LossKind& kind, const TabularPolicy& policy,
                   const TabularPolicy& reference, const PreferencePair& pair) {
  if (kind.variant == LossVariant::Simpo) {
    return simpo_reward(policy, pair.prompt, pair.chosen, kind.beta) -
           simpo_reward(policy, pair.prompt, pair.rejected, kind.beta);
  }
  return irm(policy, reference, pair);
}

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double preference_prob(double margin, double beta) { return sigmoid(beta * margin); }

double loss(const LossKind& kind, double margin) {
  switch (kind.variant) {
    case LossVariant::Dpo: return softplus(-kind.beta * margin);
    case LossVariant::Slic: return std::max(0.0, 1.0 - kind.beta * margin);
    case LossVariant::Ipo: {
      const double d = margin - 1.0 / (2.0 * kind.beta);
      return d * d;
    }
    // beta is already folded into the SimPO margin
    case LossVariant::Simpo: return softplus(-margin);
  }
  return 0.0;
}

double loss_derivative(const LossKind& kind, double margin) {
  switch (kind.variant) {
    case LossVariant::Dpo: return -kind.beta * sigmoid(-kind.beta * margin);
    case LossVariant::Slic: return kind.beta * margin < 1.0 ? -kind.beta : 0.0;
    case LossVariant::Ipo: return 2.0 * (margin - 1.0 / (2.0 * kind.beta));
    case LossVariant::Simpo: return -sigmoid(-margin);
  }
  return 0.0;
}

ReferenceScores reference_scores(const TabularPolicy& reference, const PreferencePair& pair) {
  return {log_prob(reference, pair.prompt, pair.chosen),
          log_prob(reference, pair.prompt, pair.rejected)};
}

namespace {

double margin_with_ref(const LossKind& kind, const TabularPolicy& policy,
                       const ReferenceScores& ref, const PreferencePair& pair, double& w_coef,
                       double& l_coef) {
  const double lp_w = log_prob(policy, pair.prompt, pair.chosen);
  const double lp_l = log_prob(policy, pair.prompt, pair.rejected);
  if (kind.variant == LossVariant::Simpo) {
    w_coef = kind.beta / response_length(pair.chosen);
    l_coef = kind.beta / response_length(pair.rejected);
    return w_coef * lp_w - l_coef * lp_l;
  }
  w_coef = 1.0;
  l_coef = 1.0;
  return (lp_w - ref.chosen) - (lp_l - ref.rejected);
}

}  // namespace

double pair_loss(const LossKind& kind, const TabularPolicy& policy, const ReferenceScores& ref,
                 const PreferencePair& pair) {
  double wc = 0.0, lc = 0.0;
  return loss(kind, margin_with_ref(kind, policy, ref, pair, wc, lc));
}

double accumulate_loss_grad(const LossKind& kind, const TabularPolicy& policy,
                            const ReferenceScores& ref, const PreferencePair& pair, double scale,
                            Matrix& grad) {
  double wc = 0.0, lc = 0.0;
  const double m = margin_with_ref(kind, policy, ref, pair, wc, lc);
  const double dl = loss_derivative(kind, m);
  if (dl != 0.0) {
    accumulate_log_prob_grad(policy, pair.prompt, pair.chosen, scale * dl * wc, grad);
    accumulate_log_prob_grad(policy, pair.prompt, pair.rejected, -scale * dl * lc, grad);
  }
  return loss(kind, m);
}

double accumulate_loss_grad(const LossKind& kind, const TabularPolicy& policy,
                            const TabularPolicy& reference, const PreferencePair& pair,
                            double scale, Matrix& grad) {
  check_same_vocab(policy, reference);
  return accumulate_loss_grad(kind, policy, reference_scores(reference, pair), pair, scale, grad);
}

Matrix loss_grad(const LossKind& kind, const TabularPolicy& policy, const TabularPolicy& reference,
                 const PreferencePair& pair) {
  Matrix grad(policy.vocab().rows(), policy.vocab().cols());
  accumulate_loss_grad(kind, policy, reference, pair, 1.0, grad);
  return grad;
}

}  // namespace sera
