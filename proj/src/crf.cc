#include "mmom/crf.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mmom/errors.h"

namespace mmom::crf {

namespace {

void check_shapes(const ad::Tensor& emissions, const ad::Tensor& transitions) {
  const std::size_t labels = emissions.cols();
  if (emissions.rows() == 0 || labels == 0) throw ShapeError("crf: empty emissions");
  if (transitions.rows() != labels + 2 || transitions.cols() != labels + 2) {
    throw ShapeError("crf: emissions " + emissions.shape_string() + " need transitions of shape [" +
                     std::to_string(labels + 2) + ", " + std::to_string(labels + 2) + "], got " +
                     transitions.shape_string());
  }
}

double log_add_exp(std::span<const double> xs) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : xs) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double total = 0.0;
  for (double x : xs) total += std::exp(x - mx);
  return mx + std::log(total);
}

// Forward (alpha) and backward (beta) tables in log space, [n][L] each.
struct Lattice {
  std::vector<std::vector<double>> alpha, beta;
  double log_z = 0.0;
};

Lattice run_lattice(const ad::Tensor& emissions, const ad::Tensor& transitions, bool with_beta) {
  const std::size_t n = emissions.rows(), L = emissions.cols();
  const std::size_t S = start_state(L), E = stop_state(L);
  auto T = [&](std::size_t a, std::size_t b) { return transitions.at(a, b); };

  Lattice lat;
  lat.alpha.assign(n, std::vector<double>(L));
  std::vector<double> terms(L);
  for (std::size_t j = 0; j < L; ++j) lat.alpha[0][j] = T(S, j) + emissions.at(0, j);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = 0; j < L; ++j) {
      for (std::size_t k = 0; k < L; ++k) terms[k] = lat.alpha[i - 1][k] + T(k, j);
      lat.alpha[i][j] = log_add_exp(terms) + emissions.at(i, j);
    }
  }
  for (std::size_t j = 0; j < L; ++j) terms[j] = lat.alpha[n - 1][j] + T(j, E);
  lat.log_z = log_add_exp(terms);

  if (with_beta) {
    lat.beta.assign(n, std::vector<double>(L));
    for (std::size_t j = 0; j < L; ++j) lat.beta[n - 1][j] = T(j, E);
    for (std::size_t i = n - 1; i-- > 0;) {
      for (std::size_t j = 0; j < L; ++j) {
        for (std::size_t k = 0; k < L; ++k) {
          terms[k] = T(j, k) + emissions.at(i + 1, k) + lat.beta[i + 1][k];
        }
        lat.beta[i][j] = log_add_exp(terms);
      }
    }
  }
  return lat;
}

}  // namespace

ad::Tensor score(const ad::Tensor& emissions, const ad::Tensor& transitions,
                 std::span<const std::size_t> labels) {
  check_shapes(emissions, transitions);
  const std::size_t n = emissions.rows(), L = emissions.cols();
  if (labels.size() != n) {
    throw ShapeError("crf: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) +
                     " positions");
  }
  std::vector<std::pair<std::size_t, std::size_t>> emit, trans;
  std::size_t prev = start_state(L);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= L) {
      throw ShapeError("crf: label " + std::to_string(labels[i]) + " out of range for " +
                       std::to_string(L) + " labels");
    }
    emit.emplace_back(i, labels[i]);
    trans.emplace_back(prev, labels[i]);
    prev = labels[i];
  }
  trans.emplace_back(prev, stop_state(L));
  return ad::add(ad::sum(ad::pick(emissions, emit)), ad::sum(ad::pick(transitions, trans)));
}

ad::Tensor log_partition(const ad::Tensor& emissions, const ad::Tensor& transitions) {
  check_shapes(emissions, transitions);
  const bool needs_grad = ad::grad_enabled() && (emissions.requires_grad() || transitions.requires_grad());
  Lattice lat = run_lattice(emissions, transitions, needs_grad);
  const std::size_t n = emissions.rows(), L = emissions.cols();
  const double log_z = lat.log_z;

  auto backward = [lat = std::move(lat), n, L](ad::Node& self) {
    ad::Node& em = *self.parents[0];
    ad::Node& tr = *self.parents[1];
    const double g = self.grad[0];
    const double log_z = lat.log_z;
    const std::size_t width = L + 2, S = start_state(L), E = stop_state(L);
    auto T = [&](std::size_t a, std::size_t b) { return tr.value[a * width + b]; };

    if (em.requires_grad) {
      auto& ge = em.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < L; ++j) {
          ge[i * L + j] += g * std::exp(lat.alpha[i][j] + lat.beta[i][j] - log_z);
        }
      }
    }
    if (tr.requires_grad) {
      auto& gt = tr.ensure_grad();
      for (std::size_t j = 0; j < L; ++j) {
        gt[S * width + j] += g * std::exp(lat.alpha[0][j] + lat.beta[0][j] - log_z);
        gt[j * width + E] += g * std::exp(lat.alpha[n - 1][j] + lat.beta[n - 1][j] - log_z);
      }
      for (std::size_t i = 1; i < n; ++i) {
        for (std::size_t k = 0; k < L; ++k) {
          for (std::size_t j = 0; j < L; ++j) {
            double lp = lat.alpha[i - 1][k] + T(k, j) + em.value[i * L + j] + lat.beta[i][j] - log_z;
            gt[k * width + j] += g * std::exp(lp);
          }
        }
      }
    }
  };
  return ad::make_result(1, 1, {log_z}, {emissions, transitions}, std::move(backward),
                         "crf_log_partition");
}

ad::Tensor negative_log_likelihood(const ad::Tensor& emissions, const ad::Tensor& transitions,
                                   std::span<const std::size_t> gold) {
  return ad::sub(log_partition(emissions, transitions), score(emissions, transitions, gold));
}

std::vector<std::size_t> viterbi(const ad::Tensor& emissions, const ad::Tensor& transitions) {
  check_shapes(emissions, transitions);
  const std::size_t n = emissions.rows(), L = emissions.cols();
  const std::size_t S = start_state(L), E = stop_state(L);

  std::vector<double> best(L), next(L);
  std::vector<std::vector<std::size_t>> back(n, std::vector<std::size_t>(L, 0));
  for (std::size_t j = 0; j < L; ++j) best[j] = transitions.at(S, j) + emissions.at(0, j);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = 0; j < L; ++j) {
      std::size_t arg = 0;
      double top = best[0] + transitions.at(0, j);
      for (std::size_t k = 1; k < L; ++k) {
        double cand = best[k] + transitions.at(k, j);
        if (cand > top) {
          top = cand;
          arg = k;
        }
      }
      next[j] = top + emissions.at(i, j);
      back[i][j] = arg;
    }
    std::swap(best, next);
  }
  std::size_t last = 0;
  double top = best[0] + transitions.at(0, E);
  for (std::size_t j = 1; j < L; ++j) {
    double cand = best[j] + transitions.at(j, E);
    if (cand > top) {
      top = cand;
      last = j;
    }
  }
  std::vector<std::size_t> path(n);
  path[n - 1] = last;
  for (std::size_t i = n - 1; i > 0; --i) path[i - 1] = back[i][path[i]];
  return path;
}

std::vector<std::vector<double>> marginals(const ad::Tensor& emissions,
                                           const ad::Tensor& transitions) {
  check_shapes(emissions, transitions);
  Lattice lat = run_lattice(emissions, transitions, true);
  const std::size_t n = emissions.rows(), L = emissions.cols();
  std::vector<std::vector<double>> out(n, std::vector<double>(L));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < L; ++j) out[i][j] = std::exp(lat.alpha[i][j] + lat.beta[i][j] - lat.log_z);
  }
  return out;
}

ad::Tensor softmax_cross_entropy(const ad::Tensor& emissions, std::span<const std::size_t> gold) {
  const std::size_t n = emissions.rows();
  if (gold.size() != n) {
    throw ShapeError("cross-entropy: " + std::to_string(gold.size()) + " labels for " +
                     std::to_string(n) + " positions");
  }
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (std::size_t i = 0; i < n; ++i) {
    if (gold[i] >= emissions.cols()) throw ShapeError("cross-entropy: label out of range");
    cells.emplace_back(i, gold[i]);
  }
  auto picked = ad::pick(ad::log_softmax(emissions, 1), cells);
  return ad::scale(ad::sum(picked), -1.0 / static_cast<double>(n));
}

std::vector<std::size_t> argmax_decode(const ad::Tensor& emissions) {
  std::vector<std::size_t> out(emissions.rows());
  for (std::size_t i = 0; i < emissions.rows(); ++i) {
    std::size_t arg = 0;
    for (std::size_t j = 1; j < emissions.cols(); ++j) {
      if (emissions.at(i, j) > emissions.at(i, arg)) arg = j;
    }
    out[i] = arg;
  }
  return out;
}

}  // namespace mmom::crf
