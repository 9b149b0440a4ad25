#ifndef CDPK_HIGH_DIM_HPP
#define CDPK_HIGH_DIM_HPP

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cdpk/core.hpp"
#include "cdpk/decomposition.hpp"
#include "cdpk/dp_counting.hpp"
#include "cdpk/low_dim.hpp"

namespace cdpk {

struct ProjectionOptions {
    double c_proj = 8.0;
    int max_dim = 2;  // 0 means no cap
    bool enabled = true;
};

inline int projected_dim(int k, double alpha, double beta, double c_proj) {
    return static_cast<int>(std::ceil(c_proj * std::log(std::max(1.0, k / beta)) / (alpha * alpha)));
}

// Gaussian projection to out_dim coordinates followed by rescaling by
// sqrt(d/out_dim), radial clipping to `radius` and division by it, so the
// output lands in the unit ball of the smaller space.
struct Projection {
    int in_dim = 0;
    int out_dim = 0;
    bool identity = true;
    std::vector<double> matrix;  // out_dim x in_dim, entries N(0, 1/in_dim)
    double scale = 1.0;
    double radius = 1.0;

    // pi(p) itself, before rescaling and clipping
    Point raw(std::span<const double> p) const {
        if (identity) return Point(p.begin(), p.end());
        Point y(out_dim, 0.0);
        for (int r = 0; r < out_dim; ++r) {
            double s = 0.0;
            for (int c = 0; c < in_dim; ++c) s += matrix[static_cast<size_t>(r) * in_dim + c] * p[c];
            y[r] = s;
        }
        return y;
    }

    Point apply(std::span<const double> p) const {
        if (identity) return Point(p.begin(), p.end());
        Point y = raw(p);
        for (double& x : y) x *= scale;
        y = clip_to_ball(std::move(y), radius);
        for (double& x : y) x /= radius;
        return y;
    }
};

inline Projection sample_projection(int d, int k, double alpha, double beta_dr, uint64_t seed, double n,
                                    const ProjectionOptions& opt = {}) {
    if (d < 1) throw Error(ErrorCode::kInvalidArgument, "dimension must be >= 1");
    Projection P;
    P.in_dim = d;
    int dh = projected_dim(k, alpha, beta_dr, opt.c_proj);
    if (opt.max_dim > 0) dh = std::min(dh, opt.max_dim);
    if (!opt.enabled || dh >= d) {
        P.out_dim = d;
        P.identity = true;
        return P;
    }
    P.identity = false;
    P.out_dim = dh;
    P.scale = std::sqrt(static_cast<double>(d) / dh);
    P.radius = std::max(1.0, std::log2(std::max(n, 2.0)));
    SplitMix64 rng(seed);
    const double sd = 1.0 / std::sqrt(static_cast<double>(d));
    P.matrix.resize(static_cast<size_t>(dh) * d);
    for (double& x : P.matrix) x = sd * standard_normal(rng);
    return P;
}

struct ClusterSummary {
    std::vector<double> n;
    std::vector<double> sum_norm;
    std::vector<Point> sum;
};

inline double exact_cluster_cost_identity(std::span<const Point> X) {
    if (X.empty()) return 0.0;
    Point s(X[0].size(), 0.0);
    double sq = 0.0;
    for (const Point& x : X) {
        sq += squared_norm(x);
        for (size_t j = 0; j < s.size(); ++j) s[j] += x[j];
    }
    return sq - squared_norm(s) / static_cast<double>(X.size());
}

inline double cluster_sse(const ClusterSummary& s, size_t j) {
    return s.sum_norm[j] - squared_norm(s.sum[j]) / std::max(s.n[j], 1.0);
}

inline double estimate_cost(const ClusterSummary& s) {
    double c = 0.0;
    for (size_t j = 0; j < s.n.size(); ++j) c += std::max(0.0, cluster_sse(s, j));
    return c;
}

// Sum_j ||p - mean|| <= sqrt(n_j * SSE_j) by Cauchy-Schwarz
inline double estimate_kmedian_cost(const ClusterSummary& s) {
    double c = 0.0;
    for (size_t j = 0; j < s.n.size(); ++j)
        c += std::sqrt(std::max(s.n[j], 1.0) * std::max(0.0, cluster_sse(s, j)));
    return c;
}

// Sum / max(n, 1), clipped into the ball. Used for k-median as well, where the
// mean costs at most twice the 1-median.
inline std::vector<Point> lift_centers(const ClusterSummary& s, int* degenerate = nullptr) {
    std::vector<Point> out;
    int deg = 0;
    for (size_t j = 0; j < s.n.size(); ++j) {
        if (s.n[j] <= 0.0) ++deg;
        Point c = s.sum[j];
        double den = std::max(s.n[j], 1.0);
        for (double& x : c) x /= den;
        out.push_back(clip_to_ball(std::move(c)));
    }
    if (degenerate) *degenerate = deg;
    return out;
}

inline std::vector<Point> kmedian_lift(const ClusterSummary& s, int* degenerate = nullptr) {
    return lift_centers(s, degenerate);
}

struct HighDimParams {
    int dim = 2;
    int k = 1;
    double alpha = 0.25;
    double beta = 0.01;
    CostKind kind = CostKind::kMeans;
    int64_t nmax = 2;
    std::optional<int64_t> horizon;
    bool noise = true;
    uint64_t seed = 0;
    ProjectionOptions projection;
    int k_prime_cap = 0;          // 0: 4k
    double c_alpha = 0.0;         // 0: 4/alpha
    std::optional<int> k_prime;   // overrides the formula
    std::optional<double> theta;
    int restarts = 10;
};

struct HighDimOutput {
    std::vector<Point> centers;
    std::vector<Point> low_centers;
    ClusterSummary summary;
    double est_cost = 0.0;
    int degenerate = 0;
    bool fallback = false;
};

// Projects each point, clusters the projections privately, then releases per
// cluster a noisy size, a noisy sum of squared norms and noisy coordinate
// sums of the original points, each with epsilon/(d+3).
class HighDimClustering {
public:
    HighDimClustering(const HighDimParams& p, PrivacyBudget& budget) : p_(p) {
        const double share = budget.epsilon() / (p.dim + 3);
        const double n = static_cast<double>(std::max<int64_t>(p.nmax, 2));
        proj_ = sample_projection(p.dim, p.k, p.alpha, p.beta / (p.dim + 3), derive_seed(p.seed, "projection"), n,
                                  p.projection);
        if (proj_.out_dim >= kMaxDim)
            throw Error(ErrorCode::kInvalidArgument, "clustering dimension too large; enable projection");
        const int L = levels_for(p.nmax);

        LowDimParams lp;
        lp.dim = proj_.out_dim;
        lp.levels = L;
        lp.k = p.k;
        int cap = p.k_prime_cap > 0 ? p.k_prime_cap : 4 * p.k;
        lp.k_prime = p.k_prime ? std::max(p.k, *p.k_prime) : coreset_size(p.k, p.alpha, lp.dim, n, p.c_alpha, cap);
        lp.alpha = p.alpha;
        lp.beta = p.beta / (p.dim + 3);
        lp.kind = p.kind;
        lp.theta = p.theta;
        lp.noise = p.noise;
        lp.seed = derive_seed(p.seed, "lowdim");
        lp.horizon = p.horizon;
        lp.restarts = p.restarts;
        low_ = std::make_unique<PrivateClustering>(lp, budget.child("lowdim", share));

        budget.allocate("count", share);
        budget.allocate("sumnorm", share);
        for (int i = 0; i < p.dim; ++i) budget.allocate("sum[" + std::to_string(i) + "]", share);
        dec_ = std::make_unique<CellDecomposition>(proj_.out_dim, L);
        summary_ = std::make_unique<KeyedHistogram<CellId>>(
            HistogramConfig{share, L, p.dim + 2, 1.0, p.horizon, p.noise, derive_seed(p.seed, "summary")});
    }

    void update(Op op, const Point& p) {
        if (op == Op::kNoop) {
            low_->tick();
            summary_->tick();
            return;
        }
        Point q = proj_.apply(p);
        low_->update(op, q);
        auto keys = dec_->keys_for(q);
        const size_t w = static_cast<size_t>(p_.dim + 2);
        const double sign = op == Op::kInsert ? 1.0 : -1.0;
        std::vector<double> vals(keys.size() * w);
        for (size_t r = 0; r < keys.size(); ++r) {
            vals[r * w] = sign;
            vals[r * w + 1] = sign * std::min(1.0, squared_norm(p));
            for (int c = 0; c < p_.dim; ++c) vals[r * w + 2 + c] = sign * p[c];
        }
        summary_->update(keys, vals);
    }

    void tick() { update(Op::kNoop, {}); }

    HighDimOutput step() const {
        HighDimOutput out;
        LowDimResult lr = low_->solve();
        out.low_centers = lr.centers;
        out.fallback = lr.fallback;
        CenterStructure cs(*dec_, lr.centers, p_.alpha);
        ClusterSums s = cluster_sums(cs, *summary_);
        out.summary = to_summary(s);
        int deg = 0;
        out.centers = lift_centers(out.summary, &deg);
        out.degenerate = deg + lr.degenerate;
        out.est_cost = p_.kind == CostKind::kMeans ? estimate_cost(out.summary) : estimate_kmedian_cost(out.summary);
        return out;
    }

    ClusterSummary to_summary(const ClusterSums& s) const {
        ClusterSummary out;
        for (const auto& row : s.sums) {
            out.n.push_back(row[0]);
            out.sum_norm.push_back(row[1]);
            out.sum.emplace_back(row.begin() + 2, row.end());
        }
        return out;
    }

    const HighDimParams& params() const { return p_; }
    const Projection& projection() const { return proj_; }
    const PrivateClustering& low() const { return *low_; }
    PrivateClustering& low() { return *low_; }
    const CellDecomposition& cells() const { return *dec_; }
    const KeyedHistogram<CellId>& summary_histogram() const { return *summary_; }
    KeyedHistogram<CellId>& summary_histogram() { return *summary_; }

private:
    HighDimParams p_;
    Projection proj_;
    std::unique_ptr<PrivateClustering> low_;
    std::unique_ptr<CellDecomposition> dec_;
    std::unique_ptr<KeyedHistogram<CellId>> summary_;
};

}  // namespace cdpk

#endif  // CDPK_HIGH_DIM_HPP
