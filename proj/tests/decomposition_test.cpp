#include <gtest/gtest.h>

#include <random>

#include "cdpk/decomposition.hpp"
#include "test_util.hpp"

using namespace cdpk;
using cdpk::testing::random_in_ball;
using cdpk::testing::random_points;

TEST(Cells, LocateNestsAcrossLevels) {
    std::mt19937_64 rng(1);
    for (int d = 1; d <= 3; ++d) {
        CellDecomposition dec(d, 10);
        for (int s = 0; s < 500; ++s) {
            Point p = random_in_ball(rng, d);
            for (int i = 1; i <= 10; ++i) {
                CellId c = dec.locate(p, i);
                EXPECT_EQ(dec.parent(c), dec.locate(p, i - 1));
                for (int j = 0; j < d; ++j) {
                    EXPECT_LE(dec.lo(c, j), p[j]);
                    EXPECT_GT(dec.hi(c, j), p[j]);
                }
                EXPECT_TRUE(dec.meets_ball(c));
            }
            EXPECT_EQ(dec.keys_for(p).size(), 10u);
        }
    }
}

TEST(Cells, DiameterIsTwoToMinusLevel) {
    CellDecomposition dec(3, 5);
    CellId c = dec.locate(Point{0.1, 0.2, 0.3}, 4);
    double diag = 0.0;
    for (int j = 0; j < 3; ++j) diag += std::pow(dec.hi(c, j) - dec.lo(c, j), 2);
    EXPECT_NEAR(std::sqrt(diag), std::ldexp(1.0, -4), 1e-15);
}

TEST(Cells, RepresentativeInsideCellAndBall) {
    std::mt19937_64 rng(2);
    CellDecomposition dec(2, 6);
    for (int s = 0; s < 2000; ++s) {
        Point p = random_in_ball(rng, 2);
        for (int i = 1; i <= 6; ++i) {
            CellId c = dec.locate(p, i);
            Point v = dec.representative(c);
            EXPECT_LE(norm(v), 1.0 + 1e-12);
            EXPECT_NEAR(dec.distance_to_box(v, c), 0.0, 1e-15);
        }
    }
}

TEST(Cells, ChildrenPartitionParent) {
    CellDecomposition dec(2, 4);
    CellId root;
    size_t level1 = 0;
    dec.for_each_child(root, [&](const CellId& c) {
        ++level1;
        EXPECT_EQ(c.level, 1);
        size_t kids = 0;
        dec.for_each_child(c, [&](const CellId& k) {
            ++kids;
            EXPECT_EQ(dec.parent(k), c);
        });
        EXPECT_GE(kids, 1u);
        EXPECT_LE(kids, 4u);
    });
    // side 1/(2 sqrt 2): the ball meets cells with |idx| < 2 sqrt 2 per axis
    EXPECT_GT(level1, 16u);
    EXPECT_LE(level1, 36u);
}

TEST(Ell, Values) {
    EXPECT_EQ(neighborhood_ell(0.25), 40);
    EXPECT_EQ(neighborhood_ell(0.125), 80);
    EXPECT_EQ(neighborhood_ell(0.5), 20);
    EXPECT_THROW(neighborhood_ell(1.0), Error);
}

struct PartitionCase {
    int d;
    int L;
    double alpha;
};

class PartitionLaws : public ::testing::TestWithParam<PartitionCase> {};

TEST_P(PartitionLaws, DisjointCoverSizeAndCost) {
    const auto pc = GetParam();
    std::mt19937_64 rng(17 * pc.d + pc.L);
    CellDecomposition dec(pc.d, pc.L);
    for (int rep = 0; rep < 5; ++rep) {
        auto C = random_points(rng, 3, pc.d);
        CenterStructure cs(dec, C, pc.alpha);
        ClusterPartition part = cs.build();
        EXPECT_LE(static_cast<double>(part.parts.size()),
                  partition_size_ceiling(3, cs.ell(), pc.d, pc.L));
        for (size_t i = 0; i < part.parts.size(); ++i) EXPECT_TRUE(cs.is_part(part.parts[i]));

        auto P = random_points(rng, 300, pc.d);
        double assigned = 0.0;
        for (const Point& p : P) {
            int hits = 0;
            long idx = part.locate(dec, p, &hits);
            ASSERT_GE(idx, 0);
            ASSERT_EQ(hits, 1);
            assigned += squared_distance(p, C[static_cast<size_t>(part.assign[static_cast<size_t>(idx)])]);
        }
        double truth = cost(P, C, CostKind::kMeans);
        EXPECT_GE(assigned, truth - 1e-12);
        EXPECT_LE(assigned - truth, pc.alpha * truth + 9.0 / pc.alpha);
    }
}

INSTANTIATE_TEST_SUITE_P(Grids, PartitionLaws,
                         ::testing::Values(PartitionCase{1, 8, 0.25}, PartitionCase{1, 10, 0.125},
                                           PartitionCase{2, 7, 0.25}, PartitionCase{2, 5, 0.5},
                                           PartitionCase{3, 4, 0.5}));

TEST(ClusterSums, BothPathsMatchBruteForce) {
    std::mt19937_64 rng(8);
    const int d = 2, L = 6;
    CellDecomposition dec(d, L);
    KeyedHistogram<CellId> h(HistogramConfig{1.0, L, 2, 1.0, std::nullopt, false, 1});
    auto P = random_points(rng, 80, d);
    for (const Point& p : P) {
        auto keys = dec.keys_for(p);
        std::vector<double> vals;
        for (size_t r = 0; r < keys.size(); ++r) {
            vals.push_back(1.0);
            vals.push_back(p[0]);
        }
        h.update(keys, vals);
    }
    auto C = random_points(rng, 3, d);
    CenterStructure cs(dec, C, 0.5);
    ClusterPartition part = cs.build();
    std::vector<double> n(3, 0.0), sx(3, 0.0);
    for (const Point& p : P) {
        long idx = part.locate(dec, p);
        int j = part.assign[static_cast<size_t>(idx)];
        n[j] += 1.0;
        sx[j] += p[0];
    }
    ClusterSums a = cluster_sums(cs, h, SumPath::kTouched);
    ClusterSums b = cluster_sums(cs, h, SumPath::kEnumerate);
    for (int j = 0; j < 3; ++j) {
        EXPECT_DOUBLE_EQ(a.sums[j][0], n[j]);
        EXPECT_NEAR(a.sums[j][1], sx[j], 1e-12);
        EXPECT_DOUBLE_EQ(b.sums[j][0], n[j]);
        EXPECT_NEAR(b.sums[j][1], sx[j], 1e-12);
    }
}

TEST(ClusterSums, TouchedPathRefusesNoise) {
    CellDecomposition dec(1, 3);
    KeyedHistogram<CellId> h(HistogramConfig{1.0, 3, 1, 1.0, 8, true, 1});
    CenterStructure cs(dec, {{0.0}}, 0.5);
    EXPECT_THROW(cluster_sums(cs, h, SumPath::kTouched), Error);
}
