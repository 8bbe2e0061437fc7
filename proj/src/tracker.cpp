#include "syncup/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "syncup/error.hpp"

namespace syncup {

namespace {

constexpr std::size_t kExhaustiveLimit = 4;

double tie_tolerance(double reference) {
  return 1e-9 * std::max(1.0, std::abs(reference));
}

// Square cost matrix of size n; columns >= real_columns are "carried" slots.
struct CostMatrix {
  std::size_t n = 0;
  std::size_t real_columns = 0;
  std::vector<double> values;

  double at(std::size_t r, std::size_t c) const { return values[r * n + c]; }
};

double total_cost(const CostMatrix& m, const std::vector<std::size_t>& cols) {
  double sum = 0.0;
  for (std::size_t r = 0; r < m.n; ++r) sum += m.at(r, cols[r]);
  return sum;
}

std::vector<std::size_t> solve_exhaustive(const CostMatrix& m) {
  std::vector<std::size_t> perm(m.n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::size_t> best = perm;
  double best_cost = total_cost(m, perm);
  while (std::next_permutation(perm.begin(), perm.end())) {
    const double c = total_cost(m, perm);
    if (c < best_cost - tie_tolerance(best_cost)) {
      best_cost = c;
      best = perm;
    }
  }
  return best;
}

// Optimal cost of the sub-problem restricted to rows/columns flagged free.
double restricted_optimum(const CostMatrix& m, const std::vector<bool>& row_free,
                          const std::vector<bool>& col_free) {
  std::vector<std::size_t> rows, cols;
  for (std::size_t i = 0; i < m.n; ++i) {
    if (row_free[i]) rows.push_back(i);
    if (col_free[i]) cols.push_back(i);
  }
  const std::size_t k = rows.size();
  if (k == 0) return 0.0;
  std::vector<double> sub(k * k);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) sub[a * k + b] = m.at(rows[a], cols[b]);
  const auto assignment = hungarian(sub, k);
  double sum = 0.0;
  for (std::size_t a = 0; a < k; ++a) sum += sub[a * k + assignment[a]];
  return sum;
}

// Hungarian optimum, then fix rows in order to the smallest column that keeps
// the total optimal. Yields the lexicographically smallest optimal mapping.
std::vector<std::size_t> solve_hungarian_lex(const CostMatrix& m) {
  const double optimum = restricted_optimum(m, std::vector<bool>(m.n, true),
                                            std::vector<bool>(m.n, true));
  std::vector<bool> row_free(m.n, true), col_free(m.n, true);
  std::vector<std::size_t> result(m.n);
  double committed = 0.0;
  for (std::size_t r = 0; r < m.n; ++r) {
    row_free[r] = false;
    bool placed = false;
    for (std::size_t c = 0; c < m.n && !placed; ++c) {
      if (!col_free[c]) continue;
      col_free[c] = false;
      const double candidate =
          committed + m.at(r, c) + restricted_optimum(m, row_free, col_free);
      if (candidate <= optimum + tie_tolerance(optimum)) {
        result[r] = c;
        committed += m.at(r, c);
        placed = true;
      } else {
        col_free[c] = true;
      }
    }
    if (!placed) {
      // Numerical corner: fall back to the plain Hungarian solution.
      std::vector<std::size_t> plain = hungarian(m.values, m.n);
      return plain;
    }
  }
  return result;
}

std::array<double, 2> centroid(const Skeleton& s) {
  double x = 0.0, y = 0.0;
  for (const auto& k : s.keypoints) {
    x += k.x;
    y += k.y;
  }
  return {x / kNumKeypoints, y / kNumKeypoints};
}

// Canonical left-to-right order for seeding identities.
bool position_less(const Skeleton& a, const Skeleton& b) {
  const auto ca = centroid(a), cb = centroid(b);
  if (ca != cb) return ca < cb;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    const auto& ka = a.keypoints[i];
    const auto& kb = b.keypoints[i];
    if (ka.x != kb.x) return ka.x < kb.x;
    if (ka.y != kb.y) return ka.y < kb.y;
    if (ka.confidence != kb.confidence) return ka.confidence < kb.confidence;
  }
  return false;
}

void advance(std::vector<Skeleton>& current, const PoseFrame& frame,
             std::vector<TrackedEntry>& out) {
  const auto assignment = assign_frame(current, frame.skeletons);
  out.clear();
  for (std::size_t id = 0; id < current.size(); ++id) {
    TrackedEntry e{frame.frame_index, frame.time_ms, current[id], true};
    if (const auto k = assignment.next_for_identity[id]) {
      e.skeleton = frame.skeletons[*k];
      e.carried = false;
    }
    current[id] = e.skeleton;
    out.push_back(std::move(e));
  }
}

}  // namespace

std::size_t TrackedSequence::carried_count() const {
  std::size_t n = 0;
  for (const auto& tl : timelines)
    for (const auto& e : tl) n += e.carried ? 1 : 0;
  return n;
}

double skeleton_distance(const Skeleton& a, const Skeleton& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    sum += std::hypot(a.keypoints[i].x - b.keypoints[i].x,
                      a.keypoints[i].y - b.keypoints[i].y);
  }
  return sum;
}

std::vector<std::size_t> hungarian(std::span<const double> cost,
                                   std::size_t n) {
  // Shortest augmenting path with potentials, O(n^3). 1-based internally.
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

FrameAssignment assign_frame(std::span<const Skeleton> prev,
                             std::span<const Skeleton> next) {
  FrameAssignment result;
  const std::size_t J = prev.size();
  result.next_for_identity.assign(J, std::nullopt);

  std::vector<std::size_t> kept(next.size());
  std::iota(kept.begin(), kept.end(), 0);
  if (J == 0) {
    result.discarded = kept;
    return result;
  }

  if (next.size() > J) {
    std::vector<double> min_dist(next.size());
    for (std::size_t k = 0; k < next.size(); ++k) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& p : prev) best = std::min(best, skeleton_distance(p, next[k]));
      min_dist[k] = best;
    }
    std::vector<std::size_t> by_badness = kept;
    std::stable_sort(by_badness.begin(), by_badness.end(),
                     [&](std::size_t a, std::size_t b) {
                       if (min_dist[a] != min_dist[b]) return min_dist[a] > min_dist[b];
                       return a > b;
                     });
    result.discarded.assign(by_badness.begin(),
                            by_badness.begin() + (next.size() - J));
    std::sort(result.discarded.begin(), result.discarded.end());
    kept.assign(by_badness.begin() + (next.size() - J), by_badness.end());
    std::sort(kept.begin(), kept.end());
  }

  CostMatrix m;
  m.n = J;
  m.real_columns = kept.size();
  m.values.assign(J * J, 0.0);
  for (std::size_t r = 0; r < J; ++r)
    for (std::size_t c = 0; c < kept.size(); ++c)
      m.values[r * J + c] = skeleton_distance(prev[r], next[kept[c]]);

  const auto cols = J <= kExhaustiveLimit ? solve_exhaustive(m)
                                          : solve_hungarian_lex(m);
  for (std::size_t r = 0; r < J; ++r) {
    if (cols[r] < m.real_columns) {
      result.next_for_identity[r] = kept[cols[r]];
      result.cost += m.at(r, cols[r]);
    }
  }
  return result;
}

TrackedSequence track(const Recording& r) {
  if (r.frames.empty()) {
    throw Error(ErrorCode::kEmptyRecording, "recording has no frames");
  }
  const std::size_t J = modal_skeleton_count(r);
  if (J == 0) {
    throw Error(ErrorCode::kEmptyRecording, "no dancers detected");
  }
  std::size_t seed = 0;
  while (r.frames[seed].skeletons.size() != J) ++seed;

  TrackedSequence seq;
  seq.fps = r.fps;
  seq.timelines.assign(J, Timeline(r.frames.size()));

  std::vector<Skeleton> seed_skeletons = r.frames[seed].skeletons;
  std::sort(seed_skeletons.begin(), seed_skeletons.end(), position_less);
  for (std::size_t id = 0; id < J; ++id) {
    seq.timelines[id][seed] = {r.frames[seed].frame_index,
                               r.frames[seed].time_ms, seed_skeletons[id],
                               false};
  }

  std::vector<TrackedEntry> step;
  std::vector<Skeleton> current = seed_skeletons;
  for (std::size_t t = seed + 1; t < r.frames.size(); ++t) {
    advance(current, r.frames[t], step);
    for (std::size_t id = 0; id < J; ++id) seq.timelines[id][t] = step[id];
  }
  current = seed_skeletons;
  for (std::size_t t = seed; t-- > 0;) {
    advance(current, r.frames[t], step);
    for (std::size_t id = 0; id < J; ++id) seq.timelines[id][t] = step[id];
  }
  return seq;
}

}  // namespace syncup
