#pragma once

// Diagonal-covariance Gaussian mixtures fitted by EM, with BIC model
// selection over a candidate component range. Soft responsibilities drive
// the fit; hard max-responsibility assignment produces the partition.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "dsorch/common.hpp"
#include "dsorch/reducer.hpp"

namespace dsorch {

inline constexpr double kVarianceFloor = 1e-6;

struct GmmFit {
  std::size_t k = 0;
  std::vector<double> weights;            // k
  Matrix means;                           // k x d
  Matrix variances;                       // k x d
  Matrix responsibilities;                // n x k
  std::vector<double> loglik_history;     // one entry per EM iteration
  bool converged = false;

  double loglik() const {
    return loglik_history.empty() ? -std::numeric_limits<double>::infinity()
                                  : loglik_history.back();
  }

  // Free parameters: k-1 mixture weights, k*d means, k*d variances.
  double bic(std::size_t n) const {
    const std::size_t d = means.empty() ? 0 : means[0].size();
    const double p = static_cast<double>(k - 1 + 2 * k * d);
    return -2.0 * loglik() + p * std::log(static_cast<double>(n));
  }
};

inline GmmFit fit_diagonal_gmm(const Matrix& x, std::size_t k, std::mt19937_64& rng,
                               double tol, std::size_t max_iter) {
  const std::size_t n = x.size();
  const std::size_t d = x[0].size();
  if (k < 1 || k > n) throw Error("gmm: component count out of range");

  GmmFit fit;
  fit.k = k;
  fit.weights.assign(k, 1.0 / static_cast<double>(k));
  fit.means.assign(k, std::vector<double>(d, 0.0));
  fit.variances.assign(k, std::vector<double>(d, 0.0));
  fit.responsibilities.assign(n, std::vector<double>(k, 0.0));

  // Global per-dimension variance seeds every component's covariance.
  std::vector<double> gmean(d, 0.0), gvar(d, 0.0);
  for (const auto& row : x) {
    for (std::size_t j = 0; j < d; ++j) gmean[j] += row[j];
  }
  for (std::size_t j = 0; j < d; ++j) gmean[j] /= static_cast<double>(n);
  for (const auto& row : x) {
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = row[j] - gmean[j];
      gvar[j] += diff * diff;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    gvar[j] = std::max(gvar[j] / static_cast<double>(n), kVarianceFloor);
  }

  // k-means++ seeding: first mean uniform, the rest proportional to squared
  // distance from the nearest chosen mean. Avoids the local optima plain
  // random init falls into on well-separated data.
  std::vector<std::size_t> chosen;
  chosen.push_back(uniform_index(rng, n));
  std::vector<double> d2(n, 0.0);
  while (chosen.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c : chosen) {
        double dist = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double diff = x[i][j] - x[c][j];
          dist += diff * diff;
        }
        best = std::min(best, dist);
      }
      d2[i] = best;
      total += best;
    }
    std::size_t pick;
    if (total <= 0.0) {
      pick = uniform_index(rng, n);
    } else {
      double u = uniform01(rng) * total;
      pick = n - 1;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (u < acc) {
          pick = i;
          break;
        }
      }
    }
    chosen.push_back(pick);
  }
  // One hard assignment to the seeds initializes means, variances, and
  // weights per component; a global-variance init would let one wide
  // component swallow well-separated groups.
  std::vector<std::size_t> assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      double dist = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = x[i][j] - x[chosen[c]][j];
        dist += diff * diff;
      }
      if (dist < best) {
        best = dist;
        assign[i] = c;
      }
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> mu(d, 0.0), var(d, 0.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (assign[i] != c) continue;
      ++count;
      for (std::size_t j = 0; j < d; ++j) mu[j] += x[i][j];
    }
    if (count == 0) {
      fit.means[c] = x[chosen[c]];
      fit.variances[c] = gvar;
      fit.weights[c] = 1.0 / static_cast<double>(n);
      continue;
    }
    for (std::size_t j = 0; j < d; ++j) mu[j] /= static_cast<double>(count);
    for (std::size_t i = 0; i < n; ++i) {
      if (assign[i] != c) continue;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = x[i][j] - mu[j];
        var[j] += diff * diff;
      }
    }
    for (std::size_t j = 0; j < d; ++j) {
      var[j] = std::max(var[j] / static_cast<double>(count), kVarianceFloor);
    }
    fit.means[c] = std::move(mu);
    fit.variances[c] = std::move(var);
    fit.weights[c] = static_cast<double>(count) / static_cast<double>(n);
  }

  const double log2pi = std::log(2.0 * M_PI);
  std::vector<double> logp(k);
  double prev = -std::numeric_limits<double>::infinity();

  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    // E step
    double loglik = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double lmax = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        double lp = std::log(std::max(fit.weights[c], 1e-300));
        for (std::size_t j = 0; j < d; ++j) {
          const double v = fit.variances[c][j];
          const double diff = x[i][j] - fit.means[c][j];
          lp += -0.5 * (log2pi + std::log(v) + diff * diff / v);
        }
        logp[c] = lp;
        lmax = std::max(lmax, lp);
      }
      double sum = 0.0;
      for (std::size_t c = 0; c < k; ++c) sum += std::exp(logp[c] - lmax);
      const double lse = lmax + std::log(sum);
      loglik += lse;
      for (std::size_t c = 0; c < k; ++c) {
        fit.responsibilities[i][c] = std::exp(logp[c] - lse);
      }
    }
    fit.loglik_history.push_back(loglik);

    if (std::abs(loglik - prev) < tol) {
      fit.converged = true;
      break;
    }
    prev = loglik;

    // M step
    for (std::size_t c = 0; c < k; ++c) {
      double nk = 0.0;
      for (std::size_t i = 0; i < n; ++i) nk += fit.responsibilities[i][c];
      if (nk < 1e-12) continue;  // starved component keeps its parameters
      fit.weights[c] = nk / static_cast<double>(n);
      std::vector<double> mu(d, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) mu[j] += fit.responsibilities[i][c] * x[i][j];
      }
      for (std::size_t j = 0; j < d; ++j) mu[j] /= nk;
      std::vector<double> var(d, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
          const double diff = x[i][j] - mu[j];
          var[j] += fit.responsibilities[i][c] * diff * diff;
        }
      }
      for (std::size_t j = 0; j < d; ++j) {
        var[j] = std::max(var[j] / nk, kVarianceFloor);
      }
      fit.means[c] = std::move(mu);
      fit.variances[c] = std::move(var);
    }
  }
  return fit;
}

struct ClusterOutcome {
  std::vector<std::vector<std::size_t>> partition;  // non-empty blocks, ordered
  std::size_t chosen_k = 0;
  bool em_warning = false;  // some EM run hit the iteration cap
  std::vector<double> loglik_history;  // history of the selected fit
};

struct ClusteringConfig {
  std::size_t leaf_threshold = 8;     // max skills per leaf cluster, >= 2
  std::size_t reduced_dim = 8;        // target dimensionality for the reducer
  std::vector<std::size_t> k_range = {2, 3, 4, 5, 6};
  double em_tol = 1e-8;
  std::size_t em_max_iter = 300;
  std::size_t em_restarts = 4;        // seeded inits per candidate k, best kept
  std::uint64_t seed = 0;
  std::size_t max_depth = 8;          // hierarchy recursion cap

  json to_json() const {
    return json{{"leaf_threshold", leaf_threshold}, {"reduced_dim", reduced_dim},
                {"k_range", k_range},               {"em_tol", em_tol},
                {"em_max_iter", em_max_iter},       {"em_restarts", em_restarts},
                {"seed", seed},                     {"max_depth", max_depth}};
  }

  static ClusteringConfig from_json(const json& j) {
    ClusteringConfig c;
    c.leaf_threshold = j.value("leaf_threshold", c.leaf_threshold);
    c.reduced_dim = j.value("reduced_dim", c.reduced_dim);
    if (j.contains("k_range")) c.k_range = j.at("k_range").get<std::vector<std::size_t>>();
    c.em_tol = j.value("em_tol", c.em_tol);
    c.em_max_iter = j.value("em_max_iter", c.em_max_iter);
    c.em_restarts = j.value("em_restarts", c.em_restarts);
    c.seed = j.value("seed", c.seed);
    c.max_depth = j.value("max_depth", c.max_depth);
    return c;
  }
};

// Reduce, fit a mixture per candidate k, select by BIC, assign each point to
// its max-responsibility component. Blocks are disjoint, non-empty, and
// cover all indices.
inline ClusterOutcome cluster_embeddings(const Matrix& vectors, const ClusteringConfig& cfg,
                                         const Reducer& reducer = PcaReducer{}) {
  const std::size_t n = vectors.size();
  if (n < 2) throw PreconditionError("cluster_embeddings: need at least 2 vectors");
  const std::size_t d = vectors[0].size();
  for (const auto& v : vectors) {
    if (v.size() != d) throw PreconditionError("cluster_embeddings: dimension mismatch");
    if (!all_finite(v)) throw Error("cluster_embeddings: non-finite input");
  }

  ClusterOutcome out;

  // Degenerate-variance guard: identical points form one block.
  bool all_equal = true;
  for (std::size_t i = 1; i < n && all_equal; ++i) all_equal = vectors[i] == vectors[0];
  if (all_equal) {
    out.partition.emplace_back(n);
    std::iota(out.partition[0].begin(), out.partition[0].end(), 0);
    out.chosen_k = 1;
    return out;
  }

  Matrix x = reducer.reduce(vectors, cfg.reduced_dim);

  std::vector<std::size_t> candidates;
  for (std::size_t k : cfg.k_range) {
    if (k >= 2 && k <= n) candidates.push_back(k);
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  if (candidates.empty()) candidates.push_back(2);

  GmmFit best;
  double best_bic = std::numeric_limits<double>::infinity();
  const std::size_t restarts = std::max<std::size_t>(cfg.em_restarts, 1);
  for (std::size_t k : candidates) {
    GmmFit best_for_k;
    for (std::size_t r = 0; r < restarts; ++r) {
      std::mt19937_64 rng(cfg.seed ^
                          fnv1a64("gmm-k-" + std::to_string(k) + "-r-" + std::to_string(r)));
      GmmFit fit = fit_diagonal_gmm(x, k, rng, cfg.em_tol, cfg.em_max_iter);
      if (best_for_k.k == 0 || fit.loglik() > best_for_k.loglik()) best_for_k = std::move(fit);
    }
    const double bic = best_for_k.bic(n);
    if (bic < best_bic) {
      best_bic = bic;
      best = std::move(best_for_k);
    }
  }
  out.em_warning = !best.converged;

  std::vector<std::vector<std::size_t>> blocks(best.k);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t arg = 0;
    for (std::size_t c = 1; c < best.k; ++c) {
      if (best.responsibilities[i][c] > best.responsibilities[i][arg]) arg = c;
    }
    blocks[arg].push_back(i);
  }
  for (auto& b : blocks) {
    if (!b.empty()) out.partition.push_back(std::move(b));
  }
  out.chosen_k = best.k;
  out.loglik_history = std::move(best.loglik_history);
  return out;
}

}  // namespace dsorch
