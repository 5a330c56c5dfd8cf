// Copyright 2026 The kwsxattn Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Independent reference implementations used as test oracles. They favour
// obviousness over speed and share no code with the library.

#ifndef KWS_TESTS_ORACLES_H_
#define KWS_TESTS_ORACLES_H_

#include <cmath>
#include <algorithm>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

namespace kws::oracle {

using Matrix = std::vector<std::vector<double>>;

inline std::vector<double> Softmax(const std::vector<double>& z) {
  double mx = z[0];
  for (double v : z) mx = std::max(mx, v);
  double sum = 0.0;
  std::vector<double> p(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) sum += p[i] = std::exp(z[i] - mx);
  for (double& v : p) v /= sum;
  return p;
}

// Collapses a frame-level path: merge repeats, then drop blanks.
inline std::vector<int> Collapse(const std::vector<int>& path, int blank) {
  std::vector<int> out;
  for (std::size_t t = 0; t < path.size(); ++t) {
    if (t > 0 && path[t] == path[t - 1]) continue;
    if (path[t] != blank) out.push_back(path[t]);
  }
  return out;
}

// Calls fn for every sequence in [0, C)^T.
inline void ForEachPath(std::size_t T, int C, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> path(T, 0);
  while (true) {
    fn(path);
    std::size_t i = 0;
    while (i < T && ++path[i] == C) path[i++] = 0;
    if (i == T) return;
  }
}

// p(labels | softmax(logits)) summed over every alignment of length T.
inline double CtcProbability(const Matrix& logits, const std::vector<int>& labels, int blank) {
  const std::size_t T = logits.size();
  const int C = static_cast<int>(logits[0].size());
  Matrix probs;
  for (const auto& row : logits) probs.push_back(Softmax(row));
  double total = 0.0;
  ForEachPath(T, C, [&](const std::vector<int>& path) {
    if (Collapse(path, blank) != labels) return;
    double p = 1.0;
    for (std::size_t t = 0; t < T; ++t) p *= probs[t][path[t]];
    total += p;
  });
  return total;
}

struct LstmState {
  std::vector<double> h, c;
};

// One LSTM step with gates laid out [i, f, g, o] along the 4H axis.
// wx is D x 4H, wh is H x 4H, both row-major.
inline LstmState LstmStep(const std::vector<double>& x, const LstmState& prev,
                          const std::vector<double>& wx, const std::vector<double>& wh,
                          const std::vector<double>& b, std::size_t H) {
  const std::size_t D = x.size();
  auto sigmoid = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  LstmState next{std::vector<double>(H), std::vector<double>(H)};
  for (std::size_t j = 0; j < H; ++j) {
    double pre[4];
    for (std::size_t g = 0; g < 4; ++g) {
      const std::size_t col = g * H + j;
      double s = b[col];
      for (std::size_t d = 0; d < D; ++d) s += x[d] * wx[d * 4 * H + col];
      for (std::size_t k = 0; k < H; ++k) s += prev.h[k] * wh[k * 4 * H + col];
      pre[g] = s;
    }
    const double i = sigmoid(pre[0]), f = sigmoid(pre[1]), g = std::tanh(pre[2]),
                 o = sigmoid(pre[3]);
    next.c[j] = f * prev.c[j] + i * g;
    next.h[j] = o * std::tanh(next.c[j]);
  }
  return next;
}

// Dynamic time warping cost between sequences of vectors with squared
// Euclidean local cost, normalized by the path-length bound n + m.
inline double Dtw(const Matrix& a, const Matrix& b) {
  const std::size_t n = a.size(), m = b.size();
  const double inf = std::numeric_limits<double>::infinity();
  Matrix cost(n + 1, std::vector<double>(m + 1, inf));
  cost[0][0] = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      double d = 0.0;
      for (std::size_t k = 0; k < a[i - 1].size(); ++k) {
        const double e = a[i - 1][k] - b[j - 1][k];
        d += e * e;
      }
      cost[i][j] = d + std::min({cost[i - 1][j], cost[i][j - 1], cost[i - 1][j - 1]});
    }
  }
  return cost[n][m] / static_cast<double>(n + m);
}

// Subsequence DTW: the template may start and end anywhere in `seq`.
inline double SubsequenceDtw(const Matrix& tmpl, const Matrix& seq) {
  const std::size_t n = tmpl.size(), m = seq.size();
  const double inf = std::numeric_limits<double>::infinity();
  Matrix cost(n + 1, std::vector<double>(m + 1, inf));
  for (std::size_t j = 0; j <= m; ++j) cost[0][j] = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      double d = 0.0;
      for (std::size_t k = 0; k < tmpl[i - 1].size(); ++k) {
        const double e = tmpl[i - 1][k] - seq[j - 1][k];
        d += e * e;
      }
      cost[i][j] = d + std::min({cost[i - 1][j], cost[i][j - 1], cost[i - 1][j - 1]});
    }
  }
  double best = inf;
  for (std::size_t j = 1; j <= m; ++j) best = std::min(best, cost[n][j]);
  return best;
}

// Probability that a random positive outscores a random negative; ties
// count one half.
inline double Auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0.0;
  for (double p : pos)
    for (double n : neg) wins += p > n ? 1.0 : p == n ? 0.5 : 0.0;
  return wins / static_cast<double>(pos.size() * neg.size());
}

}  // namespace kws::oracle

#endif  // KWS_TESTS_ORACLES_H_
