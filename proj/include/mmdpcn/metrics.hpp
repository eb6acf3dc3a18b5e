#pragma once

// Evaluation: sparsity, clustering scores, PCA projection, K-Means and
// reconstruction error, plus the metrics CSV writer.

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mmdpcn/hierarchy.hpp"
#include "mmdpcn/tensor.hpp"

namespace mmdpcn {

// Percent of components with |v_k| <= threshold. Throws EmptyVector.
double sparsity(const Vector& v, double threshold);
double sparsity(std::span<const Vector> vs, double threshold);

// 1 - H(pred | true) / H(pred): 1 when every class lands in a single cluster,
// and 1 when H(pred) = 0.
double completeness(std::span<const int> labels_true, std::span<const int> labels_pred);
double adjusted_rand_index(std::span<const int> labels_true, std::span<const int> labels_pred);
// Best one-to-one matching accuracy between clusters and classes.
double hungarian_accuracy(std::span<const int> labels_true, std::span<const int> labels_pred);

struct PcaResult {
  std::vector<Vector> points;
  std::vector<Vector> components;  // unit directions, descending eigenvalue
  std::vector<double> eigenvalues;
  bool degenerate = false;  // covariance rank < dims_out; missing axes are zero
};

// Mean-centred projection onto the top principal directions. Each direction
// is signed so that its largest-magnitude entry is positive.
PcaResult pca(std::span<const Vector> points, std::size_t dims_out);
// Throws DegenerateData when the covariance rank is below dims_out. The sign
// convention makes the result independent of `seed`.
std::vector<Vector> pca_project(std::span<const Vector> points, std::size_t dims_out, std::uint64_t seed = 0);

// Symmetric eigen-decomposition by cyclic Jacobi; eigenvalues descending,
// eigenvectors stored as rows of `vectors`.
struct SymmetricEigen {
  std::vector<double> values;
  Matrix vectors;
};
SymmetricEigen symmetric_eigen(const Matrix& s);

struct KMeansResult {
  std::vector<int> labels;
  std::vector<Vector> centroids;
  std::vector<double> inertia_trace;  // within-cluster sum of squares after each assignment
  std::size_t iterations = 0;
};

// k-means++ seeding then Lloyd iterations until assignments stop changing,
// repeated n_init times; the run with the lowest final inertia wins.
KMeansResult kmeans_fit(std::span<const Vector> points, std::size_t k, std::uint64_t seed, std::size_t max_iter = 300,
                        std::size_t n_init = 10);
std::vector<int> kmeans(std::span<const Vector> points, std::size_t k, std::uint64_t seed, std::size_t max_iter = 300,
                        std::size_t n_init = 10);

double mean_squared_error(std::span<const double> a, std::span<const double> b);

struct MetricRow {
  std::string metric;
  double value = 0.0;
  double stddev = 0.0;
};

struct ClusterReport {
  double acc = 0.0;  // completeness
  double ari = 0.0;
  double spa = 0.0;
  double lct_seconds = 0.0;
  double hungarian_acc = 0.0;
  std::vector<int> assignments;

  // Deterministic metrics only; wall times are reported by timing_rows().
  std::vector<MetricRow> rows() const;
  std::vector<MetricRow> timing_rows() const;
};

// Top-layer causes -> PCA to 3 dims -> K-Means with k clusters, scored
// against `labels`. LCT is the mean per-frame inference time in `vars`.
ClusterReport cluster_top_causes(const InferenceResult& vars, std::span<const int> labels, std::size_t k,
                                 std::uint64_t seed, double spa_threshold);

// Mean of (y - C x)^2 over all layer-1 pixels, patches reassembled into frames.
double reconstruction_mse(const std::vector<Frame>& frames, const Network& network, const InferenceResult& vars,
                          const NetworkConfig& cfg);

// Mean and population standard deviation.
MetricRow summarize(const std::string& metric, std::span<const double> samples);

// Shortest representation that round-trips (17 significant digits).
std::string format_double(double v);
void write_metrics_csv(std::ostream& os, std::span<const MetricRow> rows);
void write_metrics_csv(const std::string& path, std::span<const MetricRow> rows);

}  // namespace mmdpcn
