#pragma once

// Training objectives and the optimizer.
//
//   random-label : d_{l+}(p,h)^2 + max(0, m - d_{l-}(p,h))^2   with a frozen bank
//   pairwise     : same label  -> D(l1,l2)^2
//                  other label -> max(0, m - D(l1,l2))^2
//   cross-entropy: softmax CE of a linear head over [p ; h]
//
// d is rotate_distance, D is label_distance. The pairwise objective is shared
// by the fixed-metric regime (l = extract_label(p, h)) and the learnt regime
// (l = encode_pair(premise, hypothesis)).

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "symrel/encoder.hpp"
#include "symrel/label.hpp"
#include "symrel/metric.hpp"

namespace symrel {

struct MarginConfig {
  double margin = 0.5;
  // Throws UsageError unless margin is in (0, 2].
  void validate() const;
};

struct LabelEmbeddingBank {
  std::array<PhaseVector, 2> labels;
  bool frozen = true;

  const PhaseVector& operator[](Label l) const { return labels[ordinal(l)]; }
  std::size_t dim() const { return labels[0].dim(); }
  friend bool operator==(const LabelEmbeddingBank&, const LabelEmbeddingBank&) = default;
};

// Phases uniform in [-pi, pi), reproducible from seed; frozen.
LabelEmbeddingBank init_label_bank(std::uint64_t seed, std::size_t d);

// Linear classifier over the concatenated realized premise and hypothesis
// embeddings: logits = W [p ; h] + b, W is 2 x 4d.
struct HeadParams {
  std::size_t dim = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  static HeadParams init(std::uint64_t seed, std::size_t d, double scale);
  std::vector<std::span<double>> tensors() { return {weight, bias}; }
  std::vector<std::span<const double>> tensors() const { return {weight, bias}; }
  friend bool operator==(const HeadParams&, const HeadParams&) = default;
};

std::array<double, 2> head_logits(const HeadParams& head, const ComplexVector& p,
                                  const ComplexVector& h);

double loss_random_label(const ComplexVector& p, const ComplexVector& h,
                         const LabelEmbeddingBank& bank, Label gold, const MarginConfig& cfg);
double loss_pairwise(const PhaseVector& l1, const PhaseVector& l2, bool same_label,
                     const MarginConfig& cfg);
double loss_cross_entropy(const HeadParams& head, const ComplexVector& p, const ComplexVector& h,
                          Label gold);

struct EmbeddingLossGrad {
  double value = 0.0;
  std::vector<double> d_p;  // realized layout
  std::vector<double> d_h;
};

struct PairwiseLossGrad {
  double value = 0.0;
  std::vector<double> d_l1;  // phases
  std::vector<double> d_l2;
};

struct HeadGradients {
  std::vector<double> weight;
  std::vector<double> bias;

  static HeadGradients zeros_like(const HeadParams& head);
  std::vector<std::span<const double>> tensors() const { return {weight, bias}; }
};

struct CrossEntropyGrad {
  double value = 0.0;
  std::vector<double> d_p;
  std::vector<double> d_h;
  HeadGradients d_head;
};

EmbeddingLossGrad loss_random_label_grad(const ComplexVector& p, const ComplexVector& h,
                                         const LabelEmbeddingBank& bank, Label gold,
                                         const MarginConfig& cfg);
PairwiseLossGrad loss_pairwise_grad(const PhaseVector& l1, const PhaseVector& l2,
                                    bool same_label, const MarginConfig& cfg);
CrossEntropyGrad loss_cross_entropy_grad(const HeadParams& head, const ComplexVector& p,
                                         const ComplexVector& h, Label gold);

// ---------------------------------------------------------------------------
// Objectives composed with the encoder. Each returns the loss of one training
// term and, when `grads` is non-null, adds weight * dLoss/dParams into it.

struct TokenizedPair {
  std::vector<TokenId> premise;
  std::vector<TokenId> hypothesis;
  Label label = Label::Entailment;
};

double random_label_term(const EncoderParams& params, const TokenizedPair& ex,
                         const LabelEmbeddingBank& bank, const MarginConfig& cfg,
                         ParamGradients* grads, double weight = 1.0);

// Fixed metric: labels extracted as h / p from single-sentence encodings.
double pairwise_fixed_term(const EncoderParams& params, const TokenizedPair& a,
                           const TokenizedPair& b, const MarginConfig& cfg,
                           ParamGradients* grads, double weight = 1.0);

// Learnt metric: labels produced by joint pair encoding.
double pairwise_learnt_term(const EncoderParams& params, const TokenizedPair& a,
                            const TokenizedPair& b, const MarginConfig& cfg,
                            ParamGradients* grads, double weight = 1.0);

double cross_entropy_term(const EncoderParams& params, const HeadParams& head,
                          const TokenizedPair& ex, ParamGradients* grads,
                          HeadGradients* head_grads, double weight = 1.0);

// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long t = 0;

  static AdamState for_shapes(const std::vector<std::span<const double>>& tensors);
};

// One bias-corrected Adam update. Throws DivergenceError on a non-finite gradient.
void adam_step(const std::vector<std::span<double>>& params,
               const std::vector<std::span<const double>>& grads, AdamState& state,
               const AdamConfig& cfg);

}  // namespace symrel
