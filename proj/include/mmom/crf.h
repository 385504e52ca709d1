#pragma once

// Linear-chain CRF over per-token emission scores.
//
// Transitions are a square matrix of size L + 2 for L labels. Row/column L is
// a virtual START state and L + 1 a virtual STOP state, so
//
//   score(y) = T[START, y_1] + sum_i E[i, y_i] + sum_{i>1} T[y_{i-1}, y_i]
//              + T[y_n, STOP]

#include <cstddef>
#include <span>
#include <vector>

#include "mmom/autodiff.h"

namespace mmom::crf {

inline std::size_t start_state(std::size_t labels) { return labels; }
inline std::size_t stop_state(std::size_t labels) { return labels + 1; }

// Differentiable score of one label sequence. emissions: [n, L];
// transitions: [L + 2, L + 2].
ad::Tensor score(const ad::Tensor& emissions, const ad::Tensor& transitions,
                 std::span<const std::size_t> labels);

// log sum_y exp(score(y)) via the forward algorithm in log space. The
// gradient is computed with forward-backward marginals.
ad::Tensor log_partition(const ad::Tensor& emissions, const ad::Tensor& transitions);

// log_partition - score(gold).
ad::Tensor negative_log_likelihood(const ad::Tensor& emissions, const ad::Tensor& transitions,
                                   std::span<const std::size_t> gold);

// Highest-scoring sequence. Ties go to the lowest label index, both at each
// backpointer and for the final state.
std::vector<std::size_t> viterbi(const ad::Tensor& emissions, const ad::Tensor& transitions);

// Per-token marginals p(y_i = j), [n, L]. Plain values, no graph.
std::vector<std::vector<double>> marginals(const ad::Tensor& emissions,
                                           const ad::Tensor& transitions);

// Baseline head: mean over tokens of -log softmax(o_i)[y_i].
ad::Tensor softmax_cross_entropy(const ad::Tensor& emissions, std::span<const std::size_t> gold);

// Per-token argmax, lowest index on ties.
std::vector<std::size_t> argmax_decode(const ad::Tensor& emissions);

}  // namespace mmom::crf
