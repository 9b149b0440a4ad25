#ifndef CDPK_LOW_DIM_HPP
#define CDPK_LOW_DIM_HPP

#include <cmath>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cdpk/baseline.hpp"
#include "cdpk/core.hpp"
#include "cdpk/decomposition.hpp"
#include "cdpk/dp_counting.hpp"
#include "cdpk/greedy.hpp"
#include "cdpk/nets.hpp"

namespace cdpk {

inline int levels_for(int64_t nmax) {
    if (nmax < 2) return 1;
    return std::max(1, static_cast<int>(std::ceil(std::log2(static_cast<double>(nmax)) - 1e-12)));
}

// log2(n)^2 log2(T) / eps * (ln(1/beta) + sqrt(log2 T))
inline double counting_error_scale(double eps, double beta, double n, double T) {
    double ln_ = std::max(1.0, std::log2(n));
    double lt = std::max(1.0, std::log2(T));
    return ln_ * ln_ * lt / eps * (std::log(1.0 / beta) + std::sqrt(lt));
}

// per-net-point count error bound d 2^{2d} E(eps, beta, n)
inline double net_count_bound(int d, double eps, double beta, double n, double T) {
    return d * std::ldexp(1.0, 2 * d) * counting_error_scale(eps, beta, n, T);
}

inline int coreset_size(int k, double alpha, int d, double n, double c_alpha = 0.0, int cap = 0) {
    if (c_alpha <= 0.0) c_alpha = 4.0 / alpha;
    double f = std::ceil(std::pow(c_alpha, d) * std::log(std::max(n, 2.0) / alpha));
    double kp = k * std::max(1.0, f);
    if (cap > 0) kp = std::min(kp, static_cast<double>(cap));
    return std::max(k, static_cast<int>(kp));
}

// Noisy counts c(z,t) of |N^1(z) ∩ X_t| for every net point, from one keyed
// histogram whose keys are net ids. A point touches its covering nets on
// each of the L levels, at most 2^{2d} per level.
class MakePrivate {
public:
    MakePrivate(const NetIndex& net, double epsilon, CostKind kind, bool noise, uint64_t seed,
                std::optional<int64_t> horizon)
        : net_(&net), kind_(kind), hist_(HistogramConfig{epsilon, fan_out_for(net), 1, 1.0, horizon, noise, seed}) {}

    static int fan_out_for(const NetIndex& net) {
        return static_cast<int>(std::ldexp(1.0, 2 * net.dim())) * net.levels();
    }

    int fan_out() const { return hist_.config().fan_out; }

    const std::vector<NetId>& top_level() const {
        if (top_.empty()) top_ = net_->build_level(1);
        return top_;
    }

    std::vector<NetId> touched_keys(const Point& p) const {
        std::vector<NetId> keys;
        for (int i = 1; i <= net_->levels(); ++i) {
            auto z = net_->covering_nets(p, i);
            keys.insert(keys.end(), z.begin(), z.end());
        }
        return keys;
    }

    void update(Op op, const Point& p) {
        if (op == Op::kNoop) {
            hist_.tick();
            return;
        }
        auto keys = touched_keys(p);
        std::vector<double> vals(keys.size(), op == Op::kInsert ? 1.0 : -1.0);
        hist_.update(keys, vals);
    }

    void tick() { hist_.tick(); }

    double count(const NetId& z) const { return hist_.query(z); }
    double exact_count(const NetId& z) const { return hist_.exact(z); }
    double value(const NetId& z) const { return net_value(z.level, count(z), kind_); }
    double exact_value(const NetId& z) const { return net_value(z.level, exact_count(z), kind_); }

    // Noisy values of every level-1 net point, and of every net point whose
    // parent (a net point one level up with it in its 1-neighborhood) reads
    // at least theta. Everything else reads 0. Which keys were touched never
    // enters, so the table is a function of the noisy counts alone.
    NoisyValueTable table(double theta) const {
        NoisyValueTable t(theta);
        std::vector<NetId> frontier = top_level();
        for (int i = 1; i <= net_->levels() && !frontier.empty(); ++i) {
            std::vector<NetId> next;
            std::unordered_set<NetId> seen;
            for (const NetId& z : frontier) {
                double v = value(z);
                t.set(z, v);
                if (v < theta || i == net_->levels()) continue;
                net_->for_each_within(i + 1, net_->position(z), std::ldexp(1.0, -i), [&](const NetId& c) {
                    if (seen.insert(c).second) next.push_back(c);
                });
            }
            frontier = std::move(next);
        }
        return t;
    }

    std::unordered_map<NetId, double> exact_values() const {
        std::unordered_map<NetId, double> m;
        hist_.for_each_touched([&](const NetId& z, std::span<const double>) { m[z] = exact_value(z); });
        return m;
    }

    const NetIndex& net() const { return *net_; }
    KeyedHistogram<NetId>& histogram() { return hist_; }
    const KeyedHistogram<NetId>& histogram() const { return hist_; }

private:
    const NetIndex* net_;
    CostKind kind_;
    KeyedHistogram<NetId> hist_;
    mutable std::vector<NetId> top_;
};

struct LowDimParams {
    int dim = 2;
    int levels = 1;
    int k = 1;
    int k_prime = 1;
    double alpha = 0.25;
    double beta = 0.01;
    CostKind kind = CostKind::kMeans;
    std::optional<double> theta;
    bool noise = true;
    uint64_t seed = 0;
    std::optional<int64_t> horizon;
    int restarts = 10;
    double split = 0.5;  // share of the budget for the net values
};

struct LowDimResult {
    std::vector<Point> centers;
    std::vector<Point> greedy_centers;
    std::vector<double> weights;
    bool fallback = false;
    int degenerate = 0;
};

// Greedy k'-means on noisy net values, private sizes of the k' clusters,
// then the non-private refiner on the weighted coreset.
class PrivateClustering {
public:
    PrivateClustering(const LowDimParams& p, PrivacyBudget& budget)
        : p_(p),
          net_(p.dim, p.levels),
          dec_(p.dim, p.levels),
          make_private_(net_, budget.allocate("make_private", budget.epsilon() * p.split), p.kind, p.noise,
                        derive_seed(p.seed, "make_private"), p.horizon),
          counts_(HistogramConfig{budget.allocate("cluster_counts", budget.epsilon() * (1.0 - p.split)),
                                  p.levels, 1, 1.0, p.horizon, p.noise, derive_seed(p.seed, "cluster_counts")}) {
        if (p.k < 1 || p.k_prime < p.k) throw Error(ErrorCode::kInvalidArgument, "need 1 <= k <= k'");
        theta_ = p.theta ? *p.theta
                         : 3.0 * net_count_bound(p.dim, budget.epsilon() * p.split, p.beta,
                                             std::ldexp(1.0, p.levels),
                                             static_cast<double>(p.horizon.value_or(1 << 20)));
    }

    PrivateClustering(const PrivateClustering&) = delete;
    PrivateClustering& operator=(const PrivateClustering&) = delete;

    void update(Op op, const Point& p) {
        make_private_.update(op, p);
        if (op == Op::kNoop) {
            counts_.tick();
            return;
        }
        auto keys = dec_.keys_for(p);
        std::vector<double> vals(keys.size(), op == Op::kInsert ? 1.0 : -1.0);
        counts_.update(keys, vals);
    }

    void tick() { update(Op::kNoop, {}); }

    LowDimResult solve() const {
        LowDimResult r;
        GreedyResult g = recursive_greedy(net_, make_private_.table(theta_), p_.k_prime);
        r.degenerate = g.degenerate;
        for (const Point& c : g.centers) r.greedy_centers.push_back(clip_to_ball(c));
        CenterStructure cs(dec_, r.greedy_centers, p_.alpha);
        ClusterSums s = cluster_sums(cs, counts_);
        for (const auto& row : s.sums) r.weights.push_back(std::max(0.0, std::round(row[0])));
        try {
            RefineOptions opt;
            opt.restarts = p_.restarts;
            opt.seed = derive_seed(p_.seed, "refine");
            OracleResult o = refine_kmeans(r.greedy_centers, r.weights, p_.k, p_.kind, opt);
            for (const Point& c : o.centers) {
                for (double x : c)
                    if (!std::isfinite(x)) throw std::runtime_error("non-finite center");
                r.centers.push_back(clip_to_ball(c));
            }
        } catch (const std::exception&) {
            r.fallback = true;
            r.centers.assign(r.greedy_centers.begin(), r.greedy_centers.begin() + p_.k);
        }
        return r;
    }

    double theta() const { return theta_; }
    const LowDimParams& params() const { return p_; }
    const NetIndex& net() const { return net_; }
    const CellDecomposition& cells() const { return dec_; }
    const MakePrivate& values() const { return make_private_; }
    MakePrivate& values() { return make_private_; }
    const KeyedHistogram<CellId>& counts() const { return counts_; }
    KeyedHistogram<CellId>& counts() { return counts_; }

private:
    LowDimParams p_;
    NetIndex net_;
    CellDecomposition dec_;
    MakePrivate make_private_;
    KeyedHistogram<CellId> counts_;
    double theta_ = 1.0;
};

}  // namespace cdpk

#endif  // CDPK_LOW_DIM_HPP
