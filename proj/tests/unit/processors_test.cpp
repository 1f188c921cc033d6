#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "provega/processors.hpp"

using namespace provega;

namespace {

std::vector<Row> points(const std::vector<std::array<double, 2>>& pts) {
  std::vector<Row> rows;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    Row r{i, {}};
    r.columns.set("x", pts[i][0]);
    r.columns.set("y", pts[i][1]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<Row> blobs(std::size_t per_blob, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.5);
  std::vector<std::array<double, 2>> pts;
  for (std::size_t i = 0; i < per_blob; ++i) pts.push_back({n(rng), n(rng)});
  for (std::size_t i = 0; i < per_blob; ++i) pts.push_back({20 + n(rng), 20 + n(rng)});
  return points(pts);
}

std::unique_ptr<Processor> make(const Json& params, ChunkingType mode, std::span<const Row> data = {}) {
  ProcessorConfig cfg;
  cfg.name = params["name"];
  cfg.parameters = find_processor(cfg.name)->normalize(params, "p");
  ProcessorContext ctx;
  ctx.mode = mode;
  ctx.full_data = data;
  return make_processor(cfg, ctx);
}

// Plain batch Lloyd from given centroids, lowest index wins ties.
std::vector<std::array<double, 2>> batch_lloyd(const std::vector<Row>& rows, std::vector<std::array<double, 2>> c,
                                               int iterations) {
  for (int it = 0; it < iterations; ++it) {
    std::vector<std::array<double, 3>> acc(c.size(), {0, 0, 0});
    for (const auto& r : rows) {
      double x = std::get<double>(*r.columns.find("x")), y = std::get<double>(*r.columns.find("y"));
      std::size_t best = 0;
      double bd = INFINITY;
      for (std::size_t j = 0; j < c.size(); ++j) {
        double d = (x - c[j][0]) * (x - c[j][0]) + (y - c[j][1]) * (y - c[j][1]);
        if (d < bd) {
          bd = d;
          best = j;
        }
      }
      acc[best][0] += x;
      acc[best][1] += y;
      acc[best][2] += 1;
    }
    for (std::size_t j = 0; j < c.size(); ++j)
      if (acc[j][2] > 0) c[j] = {acc[j][0] / acc[j][2], acc[j][1] / acc[j][2]};
  }
  return c;
}

}  // namespace

TEST(KMeans, SingleClusterClosedForm) {
  auto rows = points({{0, 0}, {2, 0}, {4, 6}, {2, 2}});
  auto p = make({{"name", "kmeans"}, {"k", 1}}, ChunkingType::process);
  p->ingest(rows);
  auto r = p->iterate();
  auto& km = dynamic_cast<KMeans&>(*p);
  EXPECT_DOUBLE_EQ(km.centroids()[0][0], 2.0);
  EXPECT_DOUBLE_EQ(km.centroids()[0][1], 2.0);
  // Sum of squared deviations = n * variance.
  EXPECT_DOUBLE_EQ(r.metrics.at("objective"), 4 + 0 + (4 + 16) + 0 + 4 + 4 + 0);
}

TEST(KMeans, TwoBlobsMatchBatchLloyd) {
  auto rows = blobs(100, 3);
  auto p = make({{"name", "kmeans"}, {"k", 2}, {"seed", 1}}, ChunkingType::process);
  p->ingest(rows);
  auto& km = dynamic_cast<KMeans&>(*p);
  int iterations = 0;
  while (!p->converged() && iterations < 50) {
    p->iterate();
    ++iterations;
  }
  EXPECT_LE(iterations, 5);
  auto oracle = batch_lloyd(rows, km.initial_centroids(), iterations);
  for (std::size_t j = 0; j < 2; ++j) {
    EXPECT_NEAR(km.centroids()[j][0], oracle[j][0], 1e-9);
    EXPECT_NEAR(km.centroids()[j][1], oracle[j][1], 1e-9);
  }
}

TEST(KMeans, ObjectiveNonIncreasing) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 100);
  std::vector<std::array<double, 2>> pts(2000);
  for (auto& q : pts) q = {u(rng), u(rng)};
  auto p = make({{"name", "kmeans"}, {"k", 7}, {"seed", 4}}, ChunkingType::process);
  p->ingest(points(pts));
  double prev = INFINITY;
  for (int i = 0; i < 60 && !p->converged(); ++i) {
    double obj = p->iterate().metrics.at("objective");
    EXPECT_LE(obj, prev + 1e-9 * std::abs(prev));
    prev = obj;
  }
}

TEST(KMeans, EmitsOnlyChangedAssignments) {
  auto rows = blobs(50, 9);
  auto p = make({{"name", "kmeans"}, {"k", 3}}, ChunkingType::process);
  p->ingest(rows);
  auto first = p->iterate();
  EXPECT_EQ(first.updates.size(), rows.size());
  for (int i = 0; i < 20; ++i) {
    auto r = p->iterate();
    EXPECT_LE(r.updates.size(), rows.size());
    for (const auto& u : r.updates) ASSERT_TRUE(u.columns.find("cluster"));
  }
  auto last = p->iterate();
  EXPECT_TRUE(last.updates.empty());
  EXPECT_TRUE(last.converged);
}

TEST(KMeans, EmptyClusterReseededAtFarthestPoint) {
  // Seed 0 on 5 points picks initial indices from the normative shuffle; two
  // duplicate points force an empty cluster.
  auto rows = points({{0, 0}, {0, 0}, {0, 0}, {0, 0}, {10, 0}});
  auto p = make({{"name", "kmeans"}, {"k", 2}, {"seed", 0}}, ChunkingType::process);
  p->ingest(rows);
  auto idx = KMeans::initial_indices(5, 2, 0);
  auto& km = dynamic_cast<KMeans&>(*p);
  p->iterate();
  if (idx[0] != 4 && idx[1] != 4) {
    // Both initial centroids at the origin: cluster 1 is empty and reseeded
    // at (10,0), the point farthest from its centroid.
    EXPECT_EQ(km.centroids()[1], (KMeans::Point{10, 0}));
    EXPECT_EQ(km.assignment()[4], 1);
  } else {
    GTEST_SKIP() << "seed picked the outlier";
  }
}

TEST(KMeans, InsufficientDataInProcessMode) {
  auto p = make({{"name", "kmeans"}, {"k", 5}}, ChunkingType::process);
  p->ingest(points({{0, 0}, {1, 1}}));
  EXPECT_THROW(p->iterate(), InsufficientDataError);
  auto m = make({{"name", "kmeans"}, {"k", 5}}, ChunkingType::mixed);
  m->ingest(points({{0, 0}, {1, 1}}));
  EXPECT_TRUE(m->iterate().updates.empty());
}

TEST(KMeans, CloneReplaysIdentically) {
  auto rows = blobs(40, 2);
  auto p = make({{"name", "kmeans"}, {"k", 3}}, ChunkingType::mixed);
  std::span<const Row> all(rows);
  p->ingest(all.subspan(0, 20));
  p->iterate();
  auto snapshot = p->clone();
  p->ingest(all.subspan(20, 20));
  auto a = p->iterate();
  snapshot->ingest(all.subspan(20, 20));
  auto b = snapshot->iterate();
  EXPECT_EQ(a.updates, b.updates);
  EXPECT_EQ(a.metrics, b.metrics);
}

TEST(KMeans, ParamsValidated) {
  EXPECT_THROW(make({{"name", "kmeans"}, {"k", "three"}}, ChunkingType::process), ValidationError);
  EXPECT_THROW(make({{"name", "kmeans"}, {"k", 2}, {"bogus", 1}}, ChunkingType::process), ValidationError);
}

TEST(Density, SinglePoint) {
  auto rows = points({{0.2, 0.7}});
  auto p = make({{"name", "density"}, {"bins_x", 2}, {"bins_y", 2}, {"x_min", 0}, {"x_max", 1}, {"y_min", 0}, {"y_max", 1}},
                ChunkingType::data, rows);
  p->ingest(rows);
  auto r = p->iterate();
  ASSERT_EQ(r.inserts.size(), 1u);
  EXPECT_EQ(std::get<std::int64_t>(*r.inserts[0].columns.find("count")), 1);
  EXPECT_EQ(std::get<std::int64_t>(*r.inserts[0].columns.find("bin_x")), 0);
  EXPECT_EQ(std::get<std::int64_t>(*r.inserts[0].columns.find("bin_y")), 1);
  EXPECT_GE(r.inserts[0].id, kProcessorIdBase);
}

TEST(Density, ZeroBinsRejected) {
  auto rows = points({{0, 0}, {1, 1}});
  EXPECT_THROW(make({{"name", "density"}, {"bins_x", 0}}, ChunkingType::data, rows), Error);
}

TEST(Density, StabilityRisesTowardOne) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::array<double, 2>> pts(1000);
  for (auto& q : pts) q = {u(rng), u(rng)};
  auto rows = points(pts);
  auto p = make({{"name", "density"}, {"bins_x", 8}, {"bins_y", 8}}, ChunkingType::data, rows);
  std::span<const Row> all(rows);
  std::vector<double> stab;
  for (std::size_t i = 0; i < 1000; i += 100) {
    p->ingest(all.subspan(i, 100));
    stab.push_back(p->iterate().metrics.at("stability"));
  }
  EXPECT_EQ(stab.front(), 0.0);
  EXPECT_GT(stab.back(), stab[1]);
  EXPECT_GT(stab.back(), 0.85);
  for (double s : stab) {
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(Density, ProcessModeRefinesCoarseToFine) {
  std::vector<std::array<double, 2>> pts;
  for (int i = 0; i < 64; ++i) pts.push_back({static_cast<double>(i % 8), static_cast<double>(i / 8)});
  auto rows = points(pts);
  auto p = make({{"name", "density"}, {"bins_x", 8}, {"bins_y", 8}}, ChunkingType::process, rows);
  p->ingest(rows);
  EXPECT_EQ(p->max_iterations(), 4u);
  std::size_t live = 0;
  for (int t = 0; t < 4; ++t) {
    auto r = p->iterate();
    live += r.inserts.size();
    live -= r.removes.size();
    EXPECT_EQ(live, static_cast<std::size_t>(1u << (2 * t)));
  }
  EXPECT_TRUE(p->converged());
}
