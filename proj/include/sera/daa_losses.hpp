#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "sera/policy.hpp"

namespace sera {

struct PreferencePair {
  TokenSeq prompt;
  TokenSeq chosen;
  TokenSeq rejected;
  std::uint64_t id = 0;

  friend bool operator==(const PreferencePair&, const PreferencePair&) = default;
};

// Throws DomainError if chosen == rejected or a sequence is invalid.
void validate_pair(const Vocab& vocab, const PreferencePair& pair);

enum class LossVariant { Dpo, Ipo, Slic, Simpo };

std::string_view to_string(LossVariant v);
LossVariant parse_loss_variant(std::string_view name);

struct LossKind {
  LossVariant variant = LossVariant::Dpo;
  double beta = 0.2;

  void validate() const;
};

// Conventional beta for each loss: 0.2 for DPO and SLiC-HF, 1.0 for IPO.
double default_beta(LossVariant v);

// log(pi(y|x) / pi_ref(y|x)), without any beta scaling.
double implicit_reward(const TabularPolicy& policy, const TabularPolicy& reference,
                       const TokenSeq& prompt, const TokenSeq& response);

// (beta / |y|) * log pi(y|x); |y| counts eos when present.
double simpo_reward(const TabularPolicy& policy, const TokenSeq& prompt, const TokenSeq& response,
                    double beta);

// Implicit reward margin: r(chosen) - r(rejected).
double irm(const TabularPolicy& policy, const TabularPolicy& reference, const PreferencePair& pair);

// The margin a given loss consumes: irm for DPO/IPO/SLiC, the SimPO reward
// difference for SimPO (reference unused).
double loss_margin(const LossKind& kind, const TabularPolicy& policy,
                   const TabularPolicy& reference, const PreferencePair& pair);

// sigma(beta * margin)
double preference_prob(double margin, double beta);

// log(1 + exp(x)), stable for large |x|.
double softplus(double x);
double sigmoid(double x);

double loss(const LossKind& kind, double margin);

// dL/dm; the SLiC hinge returns 0 at the kink.
double loss_derivative(const LossKind& kind, double margin);

// Reference log-probabilities of a pair, fixed for the whole iteration.
struct ReferenceScores {
  double chosen = 0.0;
  double rejected = 0.0;
};

ReferenceScores reference_scores(const TabularPolicy& reference, const PreferencePair& pair);

// Adds scale * dL/dlogits into grad and returns the pair's loss.
double accumulate_loss_grad(const LossKind& kind, const TabularPolicy& policy,
                            const ReferenceScores& ref, const PreferencePair& pair, double scale,
                            Matrix& grad);
double accumulate_loss_grad(const LossKind& kind, const TabularPolicy& policy,
                            const TabularPolicy& reference, const PreferencePair& pair,
                            double scale, Matrix& grad);

// Loss of one pair with a precomputed reference.
double pair_loss(const LossKind& kind, const TabularPolicy& policy, const ReferenceScores& ref,
                 const PreferencePair& pair);

Matrix loss_grad(const LossKind& kind, const TabularPolicy& policy, const TabularPolicy& reference,
                 const PreferencePair& pair);

}  // namespace sera
