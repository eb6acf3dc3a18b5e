#include "mmdpcn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "mmdpcn/errors.hpp"

namespace mmdpcn {

namespace {

struct Contingency {
  std::vector<int> true_ids;
  std::vector<int> pred_ids;
  std::vector<std::vector<double>> counts;  // [true][pred]
  double total = 0.0;
};

Contingency contingency(std::span<const int> a, std::span<const int> b) {
  require(a.size() == b.size(), ErrorKind::LengthMismatch,
          "label lists differ in length (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  require(!a.empty(), ErrorKind::EmptyVector, "label lists are empty");
  std::map<int, std::size_t> ai, bi;
  for (int v : a) ai.emplace(v, 0);
  for (int v : b) bi.emplace(v, 0);
  Contingency c;
  for (auto& [k, idx] : ai) {
    idx = c.true_ids.size();
    c.true_ids.push_back(k);
  }
  for (auto& [k, idx] : bi) {
    idx = c.pred_ids.size();
    c.pred_ids.push_back(k);
  }
  c.counts.assign(c.true_ids.size(), std::vector<double>(c.pred_ids.size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i) c.counts[ai[a[i]]][bi[b[i]]] += 1.0;
  c.total = static_cast<double>(a.size());
  return c;
}

double comb2(double n) { return n * (n - 1.0) / 2.0; }

double squared_distance(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Minimum-cost assignment on a square cost matrix (Kuhn-Munkres, O(n^3)).
std::vector<int> assign_min_cost(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
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
  std::vector<int> row_to_col(n, -1);
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = static_cast<int>(j - 1);
  return row_to_col;
}

}  // namespace

double sparsity(const Vector& v, double threshold) {
  require(!v.empty(), ErrorKind::EmptyVector, "sparsity of an empty vector");
  require(threshold >= 0.0, ErrorKind::InvalidArgument, "sparsity threshold must be nonnegative");
  std::size_t zeros = 0;
  for (double x : v)
    if (std::abs(x) <= threshold) ++zeros;
  return 100.0 * static_cast<double>(zeros) / static_cast<double>(v.size());
}

double sparsity(std::span<const Vector> vs, double threshold) {
  require(!vs.empty(), ErrorKind::EmptyVector, "sparsity of an empty list");
  double total = 0.0;
  for (const auto& v : vs) total += sparsity(v, threshold);
  return total / static_cast<double>(vs.size());
}

double completeness(std::span<const int> labels_true, std::span<const int> labels_pred) {
  const Contingency c = contingency(labels_true, labels_pred);
  std::vector<double> cols(c.pred_ids.size(), 0.0);
  for (const auto& row : c.counts)
    for (std::size_t j = 0; j < row.size(); ++j) cols[j] += row[j];
  double h_pred = 0.0;
  for (double n : cols)
    if (n > 0.0) h_pred -= n / c.total * std::log(n / c.total);
  if (h_pred <= 0.0) return 1.0;
  double h_cond = 0.0;  // H(pred | true)
  for (const auto& row : c.counts) {
    const double n = std::accumulate(row.begin(), row.end(), 0.0);
    for (double v : row)
      if (v > 0.0) h_cond -= v / c.total * std::log(v / n);
  }
  return std::clamp(1.0 - h_cond / h_pred, 0.0, 1.0);
}

double adjusted_rand_index(std::span<const int> labels_true, std::span<const int> labels_pred) {
  const Contingency c = contingency(labels_true, labels_pred);
  double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
  std::vector<double> cols(c.pred_ids.size(), 0.0);
  for (const auto& row : c.counts) {
    double r = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      sum_ij += comb2(row[j]);
      r += row[j];
      cols[j] += row[j];
    }
    sum_a += comb2(r);
  }
  for (double v : cols) sum_b += comb2(v);
  const double pairs = comb2(c.total);
  if (pairs == 0.0) return 1.0;
  const double expected = sum_a * sum_b / pairs;
  const double max_index = 0.5 * (sum_a + sum_b);
  // Both partitions trivial (all singletons or one cluster each).
  if (max_index == expected) return 1.0;
  return (sum_ij - expected) / (max_index - expected);
}

double hungarian_accuracy(std::span<const int> labels_true, std::span<const int> labels_pred) {
  const Contingency c = contingency(labels_true, labels_pred);
  const std::size_t n = std::max(c.true_ids.size(), c.pred_ids.size());
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < c.true_ids.size(); ++i)
    for (std::size_t j = 0; j < c.pred_ids.size(); ++j) cost[i][j] = -c.counts[i][j];
  const auto match = assign_min_cost(cost);
  double hit = 0.0;
  for (std::size_t i = 0; i < c.true_ids.size(); ++i)
    if (match[i] >= 0 && static_cast<std::size_t>(match[i]) < c.pred_ids.size()) hit += c.counts[i][match[i]];
  return hit / c.total;
}

SymmetricEigen symmetric_eigen(const Matrix& s) {
  require(s.rows() == s.cols(), ErrorKind::DimensionMismatch, "symmetric_eigen needs a square matrix");
  const std::size_t n = s.rows();
  Matrix a = s;
  Matrix v = Matrix::identity(n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0, diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      diag += a(i, i) * a(i, i);
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    }
    if (off <= 1e-30 * std::max(diag, 1e-300)) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
  SymmetricEigen out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t r = 0; r < n; ++r) {
    out.values[r] = a(order[r], order[r]);
    for (std::size_t k = 0; k < n; ++k) out.vectors(r, k) = v(k, order[r]);
  }
  return out;
}

PcaResult pca(std::span<const Vector> points, std::size_t dims_out) {
  require(points.size() >= 2, ErrorKind::InvalidArgument, "pca needs at least two points");
  const std::size_t dim = points.front().size();
  for (const auto& p : points) require(p.size() == dim, ErrorKind::DimensionMismatch, "pca: points differ in length");
  require(dims_out >= 1 && dims_out <= dim, ErrorKind::InvalidArgument, "pca: dims_out must be in [1, input dim]");
  const std::size_t n = points.size();

  Vector mean(dim);
  for (const auto& p : points) mean += p;
  mean = (1.0 / static_cast<double>(n)) * mean;
  std::vector<Vector> centred;
  centred.reserve(n);
  for (const auto& p : points) centred.push_back(p - mean);
  const double denom = static_cast<double>(n - 1);

  PcaResult out;
  std::vector<Vector> dirs;
  std::vector<double> vals;
  if (n < dim) {
    // Eigenvectors of the n x n Gram matrix map onto those of the covariance.
    Matrix g(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) g(i, j) = g(j, i) = dot(centred[i], centred[j]) / denom;
    const SymmetricEigen e = symmetric_eigen(g);
    for (std::size_t r = 0; r < std::min(dims_out, n); ++r) {
      Vector d(dim);
      for (std::size_t i = 0; i < n; ++i) d += e.vectors(r, i) * centred[i];
      const double len = norm2(d);
      vals.push_back(e.values[r]);
      dirs.push_back(len > 0.0 ? (1.0 / len) * d : d);
    }
  } else {
    Matrix cov(dim, dim);
    for (const auto& p : centred) add_outer(cov, 1.0 / denom, p, p);
    const SymmetricEigen e = symmetric_eigen(cov);
    for (std::size_t r = 0; r < dims_out; ++r) {
      Vector d(dim);
      for (std::size_t k = 0; k < dim; ++k) d[k] = e.vectors(r, k);
      vals.push_back(e.values[r]);
      dirs.push_back(std::move(d));
    }
  }

  const double top = vals.empty() ? 0.0 : std::max(vals.front(), 0.0);
  for (std::size_t r = 0; r < dims_out; ++r) {
    const bool present = r < vals.size() && vals[r] > 1e-12 * std::max(top, 1.0) && norm2(dirs[r]) > 0.0;
    if (!present) {
      out.degenerate = true;
      out.components.push_back(Vector(dim));
      out.eigenvalues.push_back(0.0);
      continue;
    }
    Vector d = dirs[r];
    std::size_t arg = 0;
    for (std::size_t k = 1; k < dim; ++k)
      if (std::abs(d[k]) > std::abs(d[arg])) arg = k;
    if (d[arg] < 0.0) d = -1.0 * d;
    out.components.push_back(std::move(d));
    out.eigenvalues.push_back(vals[r]);
  }
  for (const auto& p : centred) {
    Vector q(dims_out);
    for (std::size_t r = 0; r < dims_out; ++r) q[r] = dot(out.components[r], p);
    out.points.push_back(std::move(q));
  }
  return out;
}

std::vector<Vector> pca_project(std::span<const Vector> points, std::size_t dims_out, std::uint64_t) {
  PcaResult r = pca(points, dims_out);
  require(!r.degenerate, ErrorKind::DegenerateData, "covariance rank is below the requested projection dimension");
  return std::move(r.points);
}

namespace {

KMeansResult kmeans_single(std::span<const Vector> points, std::size_t k, std::mt19937_64& rng, std::size_t max_iter) {
  const std::size_t n = points.size();
  const std::size_t dim = points.front().size();
  KMeansResult out;
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  out.centroids.push_back(points[first(rng)]);
  std::vector<double> d2(n);
  while (out.centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : out.centroids) best = std::min(best, squared_distance(points[i], c));
      d2[i] = best;
      total += best;
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      for (pick = 0; pick + 1 < n; ++pick) {
        target -= d2[pick];
        if (target < 0.0 && d2[pick] > 0.0) break;
      }
      // Never pick a point that already coincides with a centroid.
      while (d2[pick] == 0.0) pick = (pick + 1) % n;
    } else {
      pick = out.centroids.size();  // all points identical
    }
    out.centroids.push_back(points[pick]);
  }

  out.labels.assign(n, -1);
  for (std::size_t it = 0; it < std::max<std::size_t>(max_iter, 1); ++it) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = squared_distance(points[i], out.centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(c);
        }
      }
      if (out.labels[i] != best) changed = true;
      out.labels[i] = best;
      inertia += best_d;
    }
    out.inertia_trace.push_back(inertia);
    out.iterations = it + 1;
    if (!changed) break;

    std::vector<Vector> sums(k, Vector(dim));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums[out.labels[i]] += points[i];
      ++counts[out.labels[i]];
    }
    for (std::size_t c = 0; c < k; ++c)
      if (counts[c] > 0) out.centroids[c] = (1.0 / static_cast<double>(counts[c])) * sums[c];
  }
  return out;
}

}  // namespace

KMeansResult kmeans_fit(std::span<const Vector> points, std::size_t k, std::uint64_t seed, std::size_t max_iter,
                        std::size_t n_init) {
  const std::size_t n = points.size();
  require(k >= 1 && k <= n, ErrorKind::InvalidK,
          "k=" + std::to_string(k) + " must lie in [1, " + std::to_string(n) + "]");
  const std::size_t dim = points.front().size();
  for (const auto& p : points) require(p.size() == dim, ErrorKind::DimensionMismatch, "kmeans: points differ in length");

  // All restarts draw from one stream, so the result depends only on `seed`.
  std::mt19937_64 rng(seed);
  KMeansResult best = kmeans_single(points, k, rng, max_iter);
  for (std::size_t r = 1; r < n_init; ++r) {
    KMeansResult next = kmeans_single(points, k, rng, max_iter);
    if (next.inertia_trace.back() < best.inertia_trace.back()) best = std::move(next);
  }
  return best;
}

std::vector<int> kmeans(std::span<const Vector> points, std::size_t k, std::uint64_t seed, std::size_t max_iter,
                        std::size_t n_init) {
  return kmeans_fit(points, k, seed, max_iter, n_init).labels;
}

double mean_squared_error(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorKind::DimensionMismatch, "mse: lengths differ");
  if (a.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

std::vector<MetricRow> ClusterReport::rows() const {
  return {{"acc_completeness", acc, 0.0},
          {"ari", ari, 0.0},
          {"spa", spa, 0.0},
          {"acc_hungarian", hungarian_acc, 0.0}};
}

ClusterReport cluster_top_causes(const InferenceResult& vars, std::span<const int> labels, std::size_t k,
                                 std::uint64_t seed, double spa_threshold) {
  require(labels.size() == vars.frames.size(), ErrorKind::LengthMismatch, "cluster: one label per frame");
  require(vars.frames.size() >= 2, ErrorKind::DegenerateData, "cluster: need at least two frames");
  const std::vector<Vector> tops = vars.top_causes();
  const std::size_t dims = std::min<std::size_t>(3, tops.front().size());
  const PcaResult projected = pca(tops, dims);
  ClusterReport r;
  r.assignments = kmeans(projected.points, k, seed);
  r.acc = completeness(labels, r.assignments);
  r.ari = adjusted_rand_index(labels, r.assignments);
  r.hungarian_acc = hungarian_accuracy(labels, r.assignments);
  r.spa = sparsity(std::span<const Vector>(tops), spa_threshold);
  double total = 0.0;
  for (double s : vars.frame_seconds) total += s;
  r.lct_seconds = vars.frame_seconds.empty() ? 0.0 : total / static_cast<double>(vars.frame_seconds.size());
  return r;
}

std::vector<MetricRow> ClusterReport::timing_rows() const { return {{"lct_seconds", lct_seconds, 0.0}}; }

double reconstruction_mse(const std::vector<Frame>& frames, const Network& network, const InferenceResult& vars,
                          const NetworkConfig& cfg) {
  if (frames.empty()) return 0.0;
  const std::vector<Frame> rec = reconstruct_frames(frames, network, vars, cfg);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const Frame f = cfg.grayscale ? to_grayscale(frames[t]) : frames[t];
    require(f.pixels.size() == rec[t].pixels.size(), ErrorKind::DimensionMismatch,
            "reconstruction_mse: frame sizes differ");
    for (std::size_t i = 0; i < f.pixels.size(); ++i) {
      const double e = f.pixels[i] - rec[t].pixels[i];
      total += e * e;
    }
    count += f.pixels.size();
  }
  return total / static_cast<double>(count);
}

MetricRow summarize(const std::string& metric, std::span<const double> samples) {
  MetricRow row{metric, 0.0, 0.0};
  if (samples.empty()) return row;
  for (double v : samples) row.value += v;
  row.value /= static_cast<double>(samples.size());
  for (double v : samples) row.stddev += (v - row.value) * (v - row.value);
  row.stddev = std::sqrt(row.stddev / static_cast<double>(samples.size()));
  return row;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_metrics_csv(std::ostream& os, std::span<const MetricRow> rows) {
  os << "metric,value,stddev\n";
  for (const auto& r : rows) os << r.metric << ',' << format_double(r.value) << ',' << format_double(r.stddev) << '\n';
}

void write_metrics_csv(const std::string& path, std::span<const MetricRow> rows) {
  std::ofstream os(path, std::ios::trunc);
  require(static_cast<bool>(os), ErrorKind::IoError, "cannot open '" + path + "' for writing");
  write_metrics_csv(os, rows);
  require(static_cast<bool>(os), ErrorKind::IoError, "write to '" + path + "' failed");
}

}  // namespace mmdpcn
