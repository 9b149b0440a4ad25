#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "cdpk/dp_counting.hpp"
#include "cdpk/nets.hpp"

using namespace cdpk;

TEST(Laplace, MeanAndVariance) {
    SplitMix64 rng(1);
    const int n = 200000;
    const double b = 2.0;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = laplace(b, rng);
        s += x;
        s2 += x * x;
    }
    EXPECT_NEAR(s / n, 0.0, 0.03);
    EXPECT_NEAR(s2 / n, 2.0 * b * b, 0.15);
    EXPECT_THROW(laplace(0.0, rng), Error);
    EXPECT_EQ(laplace(1.0, rng, false), 0.0);
}

TEST(Laplace, InverseCdf) {
    EXPECT_DOUBLE_EQ(laplace_from_uniform(0.5, 1.0), 0.0);
    // P(X <= x) = 1 - exp(-x/b)/2 for x >= 0
    double x = laplace_from_uniform(0.9, 3.0);
    EXPECT_NEAR(1.0 - 0.5 * std::exp(-x / 3.0), 0.9, 1e-12);
    EXPECT_NEAR(laplace_from_uniform(0.1, 3.0), -x, 1e-12);
}

TEST(DyadicNoise, KnownHorizonUsesPopcountNodes) {
    DyadicNoise n(1.0, 1.0, 1000, true);
    EXPECT_EQ(n.levels_at(1), 11);  // bit_width(999) = 10, plus the leaves
    for (int64_t t = 1; t <= 1000; ++t) {
        auto nodes = n.nodes(t);
        EXPECT_EQ(static_cast<int>(nodes.size()), std::popcount(static_cast<uint64_t>(t)));
        for (const auto& nd : nodes) EXPECT_DOUBLE_EQ(nd.scale, 2.0 * 11 / 1.0);
    }
    EXPECT_THROW(n.nodes(1001), Error);
}

TEST(DyadicNoise, UnknownHorizonEpochs) {
    DyadicNoise n(0.5, 1.0, std::nullopt, true);
    for (int64_t t = 1; t <= 600; ++t) {
        const int e = std::bit_width(static_cast<uint64_t>(t)) - 1;
        const uint64_t u = static_cast<uint64_t>(t) - (uint64_t{1} << e) + 1;
        EXPECT_EQ(static_cast<int>(n.nodes(t).size()), e + std::popcount(u)) << t;
    }
}

TEST(DyadicNoise, PrefixesShareNodes) {
    // consecutive prefixes reuse every node of the longer common dyadic prefix
    DyadicNoise n(1.0, 1.0, 64, true);
    auto a = n.nodes(12);  // [1,8] + [9,12]
    auto b = n.nodes(14);  // [1,8] + [9,12] + [13,14]
    ASSERT_EQ(a.size(), 2u);
    ASSERT_EQ(b.size(), 3u);
    EXPECT_EQ(a[0].salt, b[0].salt);
    EXPECT_EQ(a[1].salt, b[1].salt);
}

TEST(DyadicNoise, DisabledIsZero) {
    DyadicNoise n(1.0, 1.0, 16, false);
    EXPECT_EQ(n.prefix(123, 7), 0.0);
}

TEST(Counter, ExactModeMatchesRunningSum) {
    NoisyCounter c(CounterConfig{1.0, 1.0, 100, false, 5});
    double sum = 0.0;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 100; ++t) {
        double x = u(rng);
        sum += x;
        c.update(x);
        EXPECT_DOUBLE_EQ(c.query(), sum);
    }
    try {
        c.update(1.5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::kSensitivity);
    }
}

TEST(Counter, ErrorWithinShape) {
    const int T = 256;
    std::vector<std::vector<double>> errs(T);
    for (int trial = 0; trial < 200; ++trial) {
        NoisyCounter c(CounterConfig{1.0, 1.0, T, true, static_cast<uint64_t>(trial)});
        for (int t = 0; t < T; ++t) {
            c.update(1.0);
            errs[t].push_back(std::fabs(c.query() - c.exact()));
        }
    }
    const double shape = counter_error_shape(T, 0.01);
    for (int t = 0; t < T; ++t) {
        std::sort(errs[t].begin(), errs[t].end());
        EXPECT_LE(errs[t][197], 8.0 * shape) << t;
    }
}

namespace {
HistogramConfig cfg(bool noise, int fan_out = 3, int width = 2) {
    return HistogramConfig{1.0, fan_out, width, 1.0, 64, noise, 99};
}
}  // namespace

TEST(Histogram, FanOutAndSensitivity) {
    KeyedHistogram<int> h(cfg(false));
    std::vector<int> keys = {1, 2, 3, 4};
    std::vector<double> vals(8, 1.0);
    try {
        h.update(keys, vals);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::kFanOut);
    }
    keys = {1, 1};
    vals.assign(4, 1.0);
    EXPECT_THROW(h.update(keys, vals), Error);
    keys = {1};
    vals = {2.0, 0.0};
    EXPECT_THROW(h.update(keys, vals), Error);
    EXPECT_EQ(h.t(), 0);
    EXPECT_DOUBLE_EQ(h.counter_epsilon(), 1.0 / 3.0);
}

TEST(Histogram, ExactQueriesMatchBruteForce) {
    KeyedHistogram<int> h(cfg(false));
    std::map<std::pair<int, int>, double> truth;
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> key(0, 9);
    std::uniform_real_distribution<double> val(-1.0, 1.0);
    for (int t = 0; t < 60; ++t) {
        std::set<int> ks;
        while (ks.size() < 3) ks.insert(key(rng));
        std::vector<int> keys(ks.begin(), ks.end());
        std::vector<double> vals;
        for (int k : keys)
            for (int c = 0; c < 2; ++c) {
                vals.push_back(val(rng));
                truth[{k, c}] += vals.back();
            }
        h.update(keys, vals);
        for (int k = 0; k < 10; ++k)
            for (int c = 0; c < 2; ++c) EXPECT_DOUBLE_EQ(h.query(k, c), (truth[{k, c}]));
    }
}

TEST(Histogram, UntouchedKeysHaveStableNoise) {
    KeyedHistogram<int> h(cfg(true));
    h.tick();
    h.tick();
    double a = h.query(12345);
    EXPECT_NE(a, 0.0);
    EXPECT_EQ(h.query(12345), a);
    EXPECT_FALSE(h.touched(12345));
    EXPECT_NE(h.query(12345, 1), a);
}

TEST(Histogram, AccumulateEqualsQuery) {
    KeyedHistogram<CellId> h(HistogramConfig{1.0, 2, 3, 1.0, std::nullopt, true, 7});
    CellId a, b;
    a.level = 1;
    b.level = 2;
    b.idx[0] = -3;
    std::vector<CellId> keys = {a, b};
    std::vector<double> vals = {1, 0.5, -0.5, 1, 1, 1};
    for (int t = 0; t < 9; ++t) h.update(keys, vals);
    auto nodes = h.current_nodes();
    for (const CellId& k : {a, b}) {
        std::vector<double> out(3, 0.0);
        h.accumulate(k, nodes, out);
        for (int c = 0; c < 3; ++c) EXPECT_NEAR(out[c], h.query(k, c), 1e-12);
    }
}

TEST(Histogram, SerializeRoundTrip) {
    KeyedHistogram<int> h(cfg(true));
    std::vector<int> keys = {3, 8};
    std::vector<double> vals = {1, -1, 0.5, 0.25};
    for (int t = 0; t < 5; ++t) h.update(keys, vals);
    std::stringstream ss;
    h.serialize(ss);
    auto g = KeyedHistogram<int>::deserialize(ss);
    EXPECT_EQ(g.t(), h.t());
    for (int k : {3, 8, 100})
        for (int c = 0; c < 2; ++c) EXPECT_EQ(g.query(k, c), h.query(k, c));

    std::stringstream junk("not a blob at all");
    EXPECT_THROW(KeyedHistogram<int>::deserialize(junk), Error);
}

TEST(Histogram, LogSeesEveryInput) {
    KeyedHistogram<int> h(cfg(false));
    int rows = 0;
    h.set_log([&](int64_t t, const int&, std::span<const double> v) {
        EXPECT_EQ(t, h.t());
        EXPECT_EQ(v.size(), 2u);
        ++rows;
    });
    std::vector<int> keys = {1, 2};
    std::vector<double> vals = {1, 1, 1, 1};
    h.update(keys, vals);
    h.tick();
    EXPECT_EQ(rows, 2);
}
