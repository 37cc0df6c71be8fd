#include "flowclust/clustering.hpp"

#include <cmath>
#include <fstream>
#include <limits>

namespace flowclust {

double squared_distance(const FeaturePoint& a, const FeaturePoint& b) {
  double d2 = 0.0;
  for (int i = 0; i < kFeatureDim; ++i) {
    const double d = a[i] - b[i];
    d2 += d * d;
  }
  return d2;
}

namespace {

void check_finite(std::span<const FeaturePoint> points) {
  for (const auto& p : points) {
    for (double v : p) {
      if (!std::isfinite(v)) throw ClusteringError("non-finite input point");
    }
  }
}

// Nearest-centroid assignment (ties to the lowest index). Returns inertia.
double assign_step(std::span<const FeaturePoint> points,
                   const std::vector<FeaturePoint>& centroids,
                   std::vector<int>& labels) {
  double inertia = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_k = 0;
    for (std::size_t k = 0; k < centroids.size(); ++k) {
      const double d2 = squared_distance(points[i], centroids[k]);
      if (d2 < best) {
        best = d2;
        best_k = static_cast<int>(k);
      }
    }
    labels[i] = best_k;
    inertia += best;
  }
  return inertia;
}

}  // namespace

std::vector<FeaturePoint> kmeanspp_init(std::span<const FeaturePoint> points,
                                        int k, Rng& rng) {
  if (k < 1) throw ClusteringError("cluster count must be >= 1");
  if (points.size() < static_cast<std::size_t>(k)) {
    throw ClusteringError("fewer points than clusters");
  }
  check_finite(points);

  std::vector<FeaturePoint> centroids;
  centroids.reserve(k);
  centroids.push_back(points[rng.uniform_int(points.size())]);

  std::vector<double> min_d2(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    min_d2[i] = squared_distance(points[i], centroids[0]);
  }

  while (static_cast<int>(centroids.size()) < k) {
    double total = 0.0;
    for (double d : min_d2) total += d;
    if (total <= 0.0) {
      throw ClusteringError("fewer than K distinct points");
    }
    const std::size_t pick = rng.discrete(min_d2);
    centroids.push_back(points[pick]);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double d2 = squared_distance(points[i], centroids.back());
      if (d2 < min_d2[i]) min_d2[i] = d2;
    }
  }
  return centroids;
}

FitResult kmeans_fit(std::span<const FeaturePoint> points,
                     std::vector<FeaturePoint> initial_centroids,
                     const KMeansOptions& options) {
  const int k = static_cast<int>(initial_centroids.size());
  if (k < 1) throw ClusteringError("no initial centroids");
  if (points.size() < static_cast<std::size_t>(k)) {
    throw ClusteringError("fewer points than clusters");
  }
  if (options.max_iterations < 1) throw ClusteringError("max_iterations must be >= 1");
  if (options.tolerance < 0.0) throw ClusteringError("tolerance must be >= 0");
  check_finite(points);

  std::vector<FeaturePoint> centroids = std::move(initial_centroids);
  std::vector<int> labels(points.size(), 0);
  std::vector<FeaturePoint> sums(k);
  std::vector<std::size_t> counts(k);

  FitResult result;
  int iterations = 0;
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    iterations = iter;
    result.inertia_by_iteration.push_back(assign_step(points, centroids, labels));

    // Re-seed any emptied cluster with the point farthest from its assigned
    // centroid (first such point on ties) — deterministic repair.
    for (auto& s : sums) s = FeaturePoint{};
    std::fill(counts.begin(), counts.end(), std::size_t{0});
    for (std::size_t i = 0; i < points.size(); ++i) ++counts[labels[i]];
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      double worst = -1.0;
      std::size_t worst_i = 0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        if (counts[labels[i]] <= 1) continue;  // don't empty another cluster
        const double d2 = squared_distance(points[i], centroids[labels[i]]);
        if (d2 > worst) {
          worst = d2;
          worst_i = i;
        }
      }
      if (worst < 0.0) throw ClusteringError("cannot repair empty cluster");
      --counts[labels[worst_i]];
      labels[worst_i] = c;
      ++counts[c];
    }

    for (std::size_t i = 0; i < points.size(); ++i) {
      for (int d = 0; d < kFeatureDim; ++d) sums[labels[i]][d] += points[i][d];
    }
    double max_disp2 = 0.0;
    for (int c = 0; c < k; ++c) {
      FeaturePoint next{};
      for (int d = 0; d < kFeatureDim; ++d) {
        next[d] = sums[c][d] / static_cast<double>(counts[c]);
      }
      max_disp2 = std::max(max_disp2, squared_distance(next, centroids[c]));
      centroids[c] = next;
    }
    if (std::sqrt(max_disp2) <= options.tolerance) break;
  }

  result.model.k = k;
  result.model.centroids = centroids;
  result.model.iterations_run = iterations;
  result.assignment.resize(points.size());
  result.model.inertia = assign_step(points, centroids, result.assignment);
  result.inertia_by_iteration.push_back(result.model.inertia);
  return result;
}

FitResult kmeans_fit_seeded(std::span<const FeaturePoint> points, int k,
                            std::uint64_t seed, const KMeansOptions& options) {
  Rng rng(seed);
  FitResult result = kmeans_fit(points, kmeanspp_init(points, k, rng), options);
  result.model.seed = seed;
  return result;
}

FitResult base_initialize(const ClusterModel& reference,
                          std::span<const FeaturePoint> points,
                          const KMeansOptions& options) {
  if (reference.k < 1 ||
      reference.centroids.size() != static_cast<std::size_t>(reference.k)) {
    throw ClusteringError("reference model malformed");
  }
  FitResult result = kmeans_fit(points, reference.centroids, options);
  result.model.seed = reference.seed;
  return result;
}

std::vector<int> predict(const ClusterModel& model,
                         std::span<const FeaturePoint> points) {
  if (model.centroids.empty()) throw ClusteringError("model has no centroids");
  std::vector<int> labels(points.size());
  assign_step(points, model.centroids, labels);
  return labels;
}

nlohmann::ordered_json model_to_json(const ClusterModel& model) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["K"] = model.k;
  j["dim"] = kFeatureDim;
  j["centroids"] = model.centroids;
  j["seed"] = model.seed;
  j["inertia"] = model.inertia;
  j["iterations_run"] = model.iterations_run;
  if (model.subsample) {
    j["subsample"] = *model.subsample;
  } else {
    j["subsample"] = nullptr;
  }
  return j;
}

ClusterModel model_from_json(const nlohmann::json& j) {
  ClusterModel m;
  if (j.at("version").get<int>() != 1) throw ClusteringError("unknown model version");
  if (j.at("dim").get<int>() != kFeatureDim) throw ClusteringError("model dimension mismatch");
  m.k = j.at("K").get<int>();
  m.centroids = j.at("centroids").get<std::vector<FeaturePoint>>();
  if (m.centroids.size() != static_cast<std::size_t>(m.k)) {
    throw ClusteringError("centroid count does not match K");
  }
  m.seed = j.at("seed").get<std::uint64_t>();
  m.inertia = j.at("inertia").get<double>();
  m.iterations_run = j.at("iterations_run").get<int>();
  if (!j.at("subsample").is_null()) m.subsample = j.at("subsample").get<std::size_t>();
  return m;
}

void save_model(const std::string& path, const ClusterModel& model) {
  std::ofstream out(path);
  if (!out) throw ClusteringError("cannot write model file: " + path);
  out << model_to_json(model).dump(2) << '\n';
}

ClusterModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ClusteringError("cannot open model file: " + path);
  nlohmann::json j;
  in >> j;
  return model_from_json(j);
}

}  // namespace flowclust
