#include <gtest/gtest.h>

#include <random>

#include "cdpk/baseline.hpp"
#include "cdpk/greedy.hpp"
#include "cdpk/low_dim.hpp"
#include "test_util.hpp"

using namespace cdpk;
using cdpk::testing::random_in_ball;

TEST(Threshold, ScalarRule) {
    // above theta: 2-accurate
    EXPECT_TRUE(check_threshold(10.0, 10.0, 4.0));
    EXPECT_TRUE(check_threshold(10.0, 5.0, 4.0));
    EXPECT_FALSE(check_threshold(10.0, 4.9, 4.0));
    EXPECT_FALSE(check_threshold(10.0, 20.1, 4.0));
    // below theta: only certifies val <= 2 theta
    EXPECT_TRUE(check_threshold(1.0, 8.0, 4.0));
    EXPECT_FALSE(check_threshold(1.0, 8.1, 4.0));
}

TEST(Threshold, MapRuleCoversMissingKeys) {
    NetId a, b;
    a.level = 1;
    b.level = 2;
    std::unordered_map<NetId, double> nval = {{a, 10.0}};
    std::unordered_map<NetId, double> val = {{a, 9.0}, {b, 1.0}};
    EXPECT_TRUE(check_threshold(nval, val, 1.0));
    val[b] = 3.0;  // noisy value is 0 < theta but val > 2 theta
    EXPECT_FALSE(check_threshold(nval, val, 1.0));
}

TEST(ValueTable, ClampsAndRejects) {
    NoisyValueTable t(1.0);
    NetId z;
    z.level = 1;
    t.set(z, -3.0);
    EXPECT_EQ(t.get(z), 0.0);
    EXPECT_THROW(t.set(z, std::nan("")), Error);
}

namespace {

NoisyValueTable exact_table(const NetIndex& net, const std::vector<Point>& P) {
    MakePrivate mp(net, 1.0, CostKind::kMeans, false, 0, std::nullopt);
    for (const Point& p : P) mp.update(Op::kInsert, p);
    NoisyValueTable t(1.0);
    for (const auto& [z, v] : mp.exact_values()) t.set(z, v);
    return t;
}

}  // namespace

TEST(Greedy, CentersAreLeavesNearTheirStart) {
    std::mt19937_64 rng(3);
    NetIndex net(2, 6);
    std::vector<Point> P;
    for (int i = 0; i < 60; ++i) {
        Point p = random_in_ball(rng, 2, 0.1);
        p[0] += (i % 2 ? 0.6 : -0.6);
        P.push_back(p);
    }
    GreedyResult g = recursive_greedy(net, exact_table(net, P), 3);
    ASSERT_EQ(g.centers.size(), 3u);
    for (size_t j = 0; j < 3; ++j) {
        EXPECT_EQ(g.center_ids[j].level, 6);
        EXPECT_LE(distance(net.position(g.start_ids[j]), g.centers[j]),
                  8.0 * std::ldexp(1.0, -g.start_ids[j].level));
    }
}

TEST(Greedy, EmptyTableFallsBackThenDegenerates) {
    NetIndex net(1, 3);
    NoisyValueTable t(1.0);
    GreedyResult g = recursive_greedy(net, t, 3);
    ASSERT_EQ(g.centers.size(), 3u);
    EXPECT_EQ(g.degenerate, 2);
    EXPECT_EQ(g.centers[1], g.centers[0]);
    EXPECT_THROW(recursive_greedy(net, t, 0), Error);
}

TEST(Greedy, DeterministicTieBreaks) {
    std::mt19937_64 rng(4);
    NetIndex net(2, 5);
    std::vector<Point> P;
    for (int i = 0; i < 40; ++i) P.push_back(random_in_ball(rng, 2));
    auto t = exact_table(net, P);
    GreedyResult a = recursive_greedy(net, t, 2);
    GreedyResult b = recursive_greedy(net, t, 2);
    EXPECT_EQ(a.center_ids, b.center_ids);
}

// cost(greedy) <= 360^2 OPT + 181^2 2k Theta + 90^2 with exact values and Theta = 1
TEST(Greedy, ApproximationChainAgainstOracle) {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 10; ++rep) {
        const int d = 1 + rep % 2, k = 1 + rep % 3;
        const int n = 10 + rep;
        std::vector<Point> P;
        for (int i = 0; i < n; ++i) P.push_back(random_in_ball(rng, d));
        NetIndex net(d, levels_for(n));
        GreedyResult g = recursive_greedy(net, exact_table(net, P), k);
        double c = cost(P, g.centers, CostKind::kMeans);
        double opt = exhaustive_kmeans(P, k, CostKind::kMeans).cost;
        EXPECT_LE(c, 360.0 * 360.0 * opt + 181.0 * 181.0 * 2 * k + 90.0 * 90.0);
    }
}
