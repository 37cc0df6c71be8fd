// clustering.hpp — k-means with D^2-weighted seeding, plus cross-dataset
// alignment by warm-starting every fit from one reference model's centroids.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowclust/features.hpp"
#include "flowclust/rng.hpp"

namespace flowclust {

class ClusteringError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KMeansOptions {
  int max_iterations = 300;
  double tolerance = 1e-6;  // convergence bound on max centroid displacement
};

struct ClusterModel {
  int k = 0;
  std::vector<FeaturePoint> centroids;
  double inertia = 0.0;
  int iterations_run = 0;
  std::uint64_t seed = 0;
  std::optional<std::size_t> subsample;  // training rows used, when capped
};

struct FitResult {
  ClusterModel model;
  std::vector<int> assignment;  // cluster index per input point
  // Objective value at every assignment pass, final pass included; Lloyd
  // guarantees this sequence is non-increasing.
  std::vector<double> inertia_by_iteration;
};

double squared_distance(const FeaturePoint& a, const FeaturePoint& b);

// D^2-weighted seeding: first center uniform, each next center drawn with
// probability proportional to the squared distance to the nearest chosen
// center. Throws ClusteringError when fewer than k distinct points exist.
std::vector<FeaturePoint> kmeanspp_init(std::span<const FeaturePoint> points,
                                        int k, Rng& rng);

// Lloyd iterations from explicit starting centroids. Converges when the
// largest centroid displacement in an iteration is <= tolerance, or after
// max_iterations. An emptied cluster is re-seeded with the point farthest
// from its assigned centroid (deterministic repair).
FitResult kmeans_fit(std::span<const FeaturePoint> points,
                     std::vector<FeaturePoint> initial_centroids,
                     const KMeansOptions& options = {});

// Seeded end-to-end fit: k-means++ initialization then Lloyd.
FitResult kmeans_fit_seeded(std::span<const FeaturePoint> points, int k,
                            std::uint64_t seed, const KMeansOptions& options = {});

// Warm-starts the fit from `reference.centroids` so cluster indices keep the
// same meaning across datasets fitted from the same reference.
FitResult base_initialize(const ClusterModel& reference,
                          std::span<const FeaturePoint> points,
                          const KMeansOptions& options = {});

std::vector<int> predict(const ClusterModel& model,
                         std::span<const FeaturePoint> points);

nlohmann::ordered_json model_to_json(const ClusterModel& model);
ClusterModel model_from_json(const nlohmann::json& j);
void save_model(const std::string& path, const ClusterModel& model);
ClusterModel load_model(const std::string& path);

}  // namespace flowclust
