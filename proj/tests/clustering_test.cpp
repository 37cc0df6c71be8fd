#include "flowclust/clustering.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>

namespace flowclust {
namespace {

FeaturePoint pt(double a, double b = 0.0) {
  return {a, b, 0.0, 0.0, 0.0, 0.0};
}

// Three well-separated 6-D blobs around (0,0), (d,0), (0,d).
std::vector<FeaturePoint> blobs(std::size_t per_cluster, double d, std::uint64_t seed,
                                std::vector<int>* truth = nullptr) {
  Rng rng(seed);
  const FeaturePoint centers[3] = {pt(0, 0), pt(d, 0), pt(0, d)};
  std::vector<FeaturePoint> points;
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < per_cluster; ++i) {
      FeaturePoint p = centers[c];
      for (auto& x : p) x += rng.normal();
      points.push_back(p);
      if (truth) truth->push_back(c);
    }
  }
  return points;
}

TEST(SquaredDistance, SumsOverAllSixDimensions) {
  FeaturePoint a{1, 2, 3, 4, 5, 6};
  FeaturePoint b{2, 4, 6, 8, 10, 12};
  EXPECT_DOUBLE_EQ(squared_distance(a, b), 1 + 4 + 9 + 16 + 25 + 36);
  EXPECT_EQ(squared_distance(a, a), 0.0);
}

TEST(KMeansPlusPlus, NeedsKDistinctPoints) {
  Rng rng(1);
  std::vector<FeaturePoint> points{pt(1), pt(1), pt(1), pt(2)};
  EXPECT_THROW(kmeanspp_init(points, 3, rng), ClusteringError);
  const auto centers = kmeanspp_init(points, 2, rng);
  ASSERT_EQ(centers.size(), 2u);
  EXPECT_NE(centers[0], centers[1]);
}

TEST(KMeansFit, InertiaNeverIncreases) {
  const auto points = blobs(200, 6.0, 11);
  const auto fit = kmeans_fit_seeded(points, 3, 17);
  ASSERT_GE(fit.inertia_by_iteration.size(), 1u);
  for (std::size_t i = 1; i < fit.inertia_by_iteration.size(); ++i) {
    EXPECT_LE(fit.inertia_by_iteration[i],
              fit.inertia_by_iteration[i - 1] * (1.0 + 1e-12) + 1e-9);
  }
  EXPECT_DOUBLE_EQ(fit.inertia_by_iteration.back(), fit.model.inertia);
  EXPECT_EQ(fit.model.k, 3);
  EXPECT_EQ(fit.model.seed, 17u);
  EXPECT_EQ(fit.assignment.size(), points.size());
}

TEST(KMeansFit, SameSeedSameResult) {
  const auto points = blobs(150, 4.0, 23);
  const auto a = kmeans_fit_seeded(points, 3, 99);
  const auto b = kmeans_fit_seeded(points, 3, 99);
  EXPECT_EQ(a.assignment, b.assignment);
  EXPECT_EQ(a.model.centroids, b.model.centroids);
  EXPECT_EQ(a.model.inertia, b.model.inertia);
}

TEST(KMeansFit, RecoversPlantedBlobs) {
  std::vector<int> truth;
  const auto points = blobs(300, 12.0, 5, &truth);
  const auto fit = kmeans_fit_seeded(points, 3, 7);
  // Every blob maps to exactly one cluster: check majority label purity.
  for (int c = 0; c < 3; ++c) {
    std::array<int, 3> counts{};
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i] == c) counts[fit.assignment[i]]++;
    }
    const int best = *std::max_element(counts.begin(), counts.end());
    EXPECT_GE(best, 297);  // >= 99% of the 300 points
  }
}

TEST(KMeansFit, RepairsEmptiedClusters) {
  // Two far groups, three requested clusters, with the starting centroids
  // placed so one centroid captures nothing: the fit must still return three
  // non-empty clusters.
  std::vector<FeaturePoint> points;
  for (int i = 0; i < 20; ++i) points.push_back(pt(0.0, i * 0.01));
  for (int i = 0; i < 20; ++i) points.push_back(pt(100.0, i * 0.01));
  std::vector<FeaturePoint> start{pt(0), pt(100), pt(1e6)};
  const auto fit = kmeans_fit(points, start);
  std::array<int, 3> counts{};
  for (int a : fit.assignment) counts[a]++;
  EXPECT_GT(counts[0], 0);
  EXPECT_GT(counts[1], 0);
  EXPECT_GT(counts[2], 0);
}

TEST(BaseInitialize, KeepsClusterIndicesAligned) {
  std::vector<int> truth_a;
  const auto ref_points = blobs(250, 10.0, 31, &truth_a);
  const auto reference = kmeans_fit_seeded(ref_points, 3, 13);

  // A second dataset drawn around the same geometry, different noise.
  std::vector<int> truth_b;
  const auto other = blobs(250, 10.0, 77, &truth_b);
  const auto warm = base_initialize(reference.model, other);

  // Index consistency: points from blob c land in the same cluster index the
  // reference fit assigned to blob c.
  std::array<int, 3> ref_index_of_blob{-1, -1, -1};
  for (int c = 0; c < 3; ++c) {
    std::array<int, 3> counts{};
    for (std::size_t i = 0; i < truth_a.size(); ++i) {
      if (truth_a[i] == c) counts[reference.assignment[i]]++;
    }
    ref_index_of_blob[c] = static_cast<int>(
        std::max_element(counts.begin(), counts.end()) - counts.begin());
  }
  std::size_t agree = 0;
  for (std::size_t i = 0; i < truth_b.size(); ++i) {
    if (warm.assignment[i] == ref_index_of_blob[truth_b[i]]) ++agree;
  }
  EXPECT_GE(static_cast<double>(agree) / truth_b.size(), 0.99);
}

TEST(Predict, MatchesFinalAssignment) {
  const auto points = blobs(100, 8.0, 3);
  const auto fit = kmeans_fit_seeded(points, 3, 21);
  EXPECT_EQ(predict(fit.model, points), fit.assignment);
}

TEST(ModelJson, RoundTripsExactly) {
  const auto points = blobs(50, 9.0, 41);
  auto fit = kmeans_fit_seeded(points, 3, 5);
  fit.model.subsample = 123;
  const auto j = model_to_json(fit.model);
  const auto back = model_from_json(j);
  EXPECT_EQ(back.k, fit.model.k);
  EXPECT_EQ(back.centroids, fit.model.centroids);
  EXPECT_EQ(back.inertia, fit.model.inertia);
  EXPECT_EQ(back.iterations_run, fit.model.iterations_run);
  EXPECT_EQ(back.seed, fit.model.seed);
  EXPECT_EQ(back.subsample, fit.model.subsample);

  const auto path =
      (std::filesystem::temp_directory_path() / "flowclust_model_rt.json").string();
  save_model(path, fit.model);
  const auto loaded = load_model(path);
  EXPECT_EQ(loaded.centroids, fit.model.centroids);
  std::remove(path.c_str());
}

}  // namespace
}  // namespace flowclust
