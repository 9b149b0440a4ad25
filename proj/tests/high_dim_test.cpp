#include <gtest/gtest.h>

#include <random>

#include "cdpk/high_dim.hpp"
#include "test_util.hpp"

using namespace cdpk;
using cdpk::testing::random_in_ball;
using cdpk::testing::random_points;
using cdpk::testing::random_stream;
using cdpk::testing::live_after;
using cdpk::testing::rel_close;

TEST(Projection, DimensionFormulaAndCap) {
    EXPECT_EQ(projected_dim(4, 0.25, 0.01, 8.0), static_cast<int>(std::ceil(8.0 * std::log(400.0) * 16.0)));
    ProjectionOptions opt;
    opt.max_dim = 3;
    Projection p = sample_projection(10, 4, 0.25, 0.01, 1, 100, opt);
    EXPECT_EQ(p.out_dim, 3);
    EXPECT_FALSE(p.identity);
    opt.enabled = false;
    Projection q = sample_projection(10, 4, 0.25, 0.01, 1, 100, opt);
    EXPECT_TRUE(q.identity);
    EXPECT_EQ(q.out_dim, 10);
    opt.enabled = true;
    opt.max_dim = 0;
    Projection r = sample_projection(5, 4, 0.25, 0.01, 1, 100, opt);
    EXPECT_TRUE(r.identity);  // the formula asks for more than d
}

TEST(Projection, OutputInUnitBall) {
    std::mt19937_64 rng(1);
    ProjectionOptions opt;
    opt.max_dim = 2;
    Projection p = sample_projection(20, 2, 0.25, 0.01, 7, 1000, opt);
    EXPECT_DOUBLE_EQ(p.radius, std::log2(1000.0));
    for (int i = 0; i < 500; ++i) EXPECT_LE(norm(p.apply(random_in_ball(rng, 20))), 1.0 + 1e-12);
}

TEST(Projection, PreservesNormsOnAverage) {
    // dh rows with entries N(0, 1/d), times sqrt(d/dh): E ||y||^2 = ||x||^2
    std::mt19937_64 rng(2);
    ProjectionOptions opt;
    opt.max_dim = 16;
    const int d = 64;
    double ratio = 0.0;
    const int trials = 200;
    for (int s = 0; s < trials; ++s) {
        Projection p = sample_projection(d, 2, 0.25, 0.01, static_cast<uint64_t>(s), 4, opt);
        Point x = random_in_ball(rng, d);
        Point y = p.raw(x);
        for (double& v : y) v *= p.scale;
        ratio += squared_norm(y) / squared_norm(x);
    }
    EXPECT_NEAR(ratio / trials, 1.0, 0.05);
}

TEST(CostIdentity, MatchesDirectSse) {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 100; ++rep) {
        auto X = random_points(rng, 1 + rep % 30, 1 + rep % 5);
        Point m(X[0].size(), 0.0);
        for (const Point& x : X)
            for (size_t j = 0; j < m.size(); ++j) m[j] += x[j] / X.size();
        double direct = 0.0;
        for (const Point& x : X) direct += squared_distance(x, m);
        EXPECT_TRUE(rel_close(exact_cluster_cost_identity(X), direct, 1e-9, 1e-13));
    }
}

TEST(Summary, EstimatesAndLift) {
    ClusterSummary s;
    s.n = {2.0, 0.0};
    s.sum = {{1.0, 0.0}, {0.3, 0.0}};
    s.sum_norm = {0.5 + 0.5, 0.0};  // points (0.5,0.5) and (0.5,-0.5)
    EXPECT_DOUBLE_EQ(cluster_sse(s, 0), 1.0 - 0.5);
    EXPECT_DOUBLE_EQ(estimate_cost(s), 0.5);
    EXPECT_DOUBLE_EQ(estimate_kmedian_cost(s), std::sqrt(2.0 * 0.5));
    int deg = 0;
    auto C = lift_centers(s, &deg);
    EXPECT_EQ(deg, 1);
    EXPECT_EQ(C[0], (Point{0.5, 0.0}));
    EXPECT_EQ(C[1], (Point{0.3, 0.0}));
}

namespace {
HighDimParams params(int d, bool noise, int max_dim) {
    HighDimParams p;
    p.dim = d;
    p.k = 2;
    p.nmax = 64;
    p.horizon = 256;
    p.noise = noise;
    p.seed = 5;
    p.projection.max_dim = max_dim;
    return p;
}
}  // namespace

TEST(HighDim, BudgetSplitPerSubMechanism) {
    const int d = 5;
    PrivacyBudget b(1.0);
    HighDimClustering h(params(d, true, 2), b);
    const double share = 1.0 / (d + 3);
    auto flat = b.flatten();
    ASSERT_EQ(flat.size(), static_cast<size_t>(2 + 2 + d));
    EXPECT_NEAR(flat[0].epsilon + flat[1].epsilon, share, 1e-15);
    for (size_t i = 2; i < flat.size(); ++i) EXPECT_DOUBLE_EQ(flat[i].epsilon, share);
    EXPECT_NEAR(b.allocated(), 1.0, 1e-12);
    EXPECT_TRUE(b.check());
}

TEST(HighDim, NoiseFreeEstimateIsExactClusterCost) {
    std::mt19937_64 rng(6);
    const int d = 4;
    Stream s = random_stream(rng, 150, 60, d);
    PrivacyBudget b(1.0);
    HighDimClustering h(params(d, false, 2), b);
    for (size_t i = 0; i < s.events.size(); ++i) {
        h.update(s.events[i].op, s.events[i].point);
        if (i % 25 != 24) continue;
        HighDimOutput o = h.step();
        auto live = live_after(s, i + 1);
        CenterStructure cs(h.cells(), o.low_centers, h.params().alpha);
        ClusterPartition part = cs.build();
        std::vector<std::vector<Point>> groups(o.low_centers.size());
        for (const Point& p : live) {
            long idx = part.locate(h.cells(), h.projection().apply(p));
            ASSERT_GE(idx, 0);
            groups[static_cast<size_t>(part.assign[static_cast<size_t>(idx)])].push_back(p);
        }
        double truth = 0.0;
        for (size_t j = 0; j < groups.size(); ++j) {
            EXPECT_DOUBLE_EQ(o.summary.n[j], static_cast<double>(groups[j].size()));
            truth += exact_cluster_cost_identity(groups[j]);
        }
        EXPECT_TRUE(rel_close(o.est_cost, truth, 1e-9, 1e-12)) << o.est_cost << " vs " << truth;
    }
}

TEST(HighDim, RejectsUnprojectedHighDimension) {
    PrivacyBudget b(1.0);
    HighDimParams p = params(9, false, 2);
    p.projection.enabled = false;
    EXPECT_THROW(HighDimClustering(p, b), Error);
}
