#ifndef CDPK_BASELINE_HPP
#define CDPK_BASELINE_HPP

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "cdpk/core.hpp"

namespace cdpk {

enum class OracleMethod { kExhaustive, kMultiRestartRefine, kIterativeMedian };

struct OracleResult {
    std::vector<Point> centers;
    double cost = 0.0;
    OracleMethod method = OracleMethod::kExhaustive;
};

inline double weighted_cost(std::span<const Point> P, std::span<const double> w,
                            std::span<const Point> S, CostKind kind) {
    double total = 0.0;
    for (size_t i = 0; i < P.size(); ++i) {
        double wi = w.empty() ? 1.0 : w[i];
        if (wi != 0.0) total += wi * point_cost(P[i], S, kind);
    }
    return total;
}

inline Point weighted_mean(std::span<const Point> P, std::span<const double> w) {
    Point m(P.empty() ? 0 : P[0].size(), 0.0);
    double tw = 0.0;
    for (size_t i = 0; i < P.size(); ++i) {
        double wi = w.empty() ? 1.0 : w[i];
        tw += wi;
        for (size_t j = 0; j < m.size(); ++j) m[j] += wi * P[i][j];
    }
    if (tw > 0.0)
        for (double& x : m) x /= tw;
    return m;
}

// Weiszfeld iteration with the Vardi-Zhang step at data points.
inline Point weiszfeld_median(std::span<const Point> P, std::span<const double> w = {},
                              int max_iter = 10000) {
    if (P.empty()) throw Error(ErrorCode::kInvalidArgument, "empty point set");
    const size_t d = P[0].size();
    auto wt = [&](size_t i) { return w.empty() ? 1.0 : w[i]; };
    auto objective = [&](const Point& y) {
        double s = 0.0;
        for (size_t i = 0; i < P.size(); ++i) s += wt(i) * distance(P[i], y);
        return s;
    };

    Point y = weighted_mean(P, w);
    double fy = objective(y);
    for (int it = 0; it < max_iter; ++it) {
        Point num(d, 0.0), r(d, 0.0);
        double den = 0.0, eta = 0.0;
        for (size_t i = 0; i < P.size(); ++i) {
            if (wt(i) == 0.0) continue;
            double dist = distance(P[i], y);
            if (dist < 1e-15) {
                eta += wt(i);
                continue;
            }
            double c = wt(i) / dist;
            den += c;
            for (size_t j = 0; j < d; ++j) {
                num[j] += c * P[i][j];
                r[j] += c * (P[i][j] - y[j]);
            }
        }
        if (den == 0.0) break;
        Point T(d);
        for (size_t j = 0; j < d; ++j) T[j] = num[j] / den;
        Point next = T;
        if (eta > 0.0) {
            double rn = norm(r);
            if (rn <= eta) break;  // y is optimal
            double a = std::max(0.0, 1.0 - eta / rn), b = std::min(1.0, eta / rn);
            for (size_t j = 0; j < d; ++j) next[j] = a * T[j] + b * y[j];
        }
        double fn = objective(next);
        double step = distance(next, y);
        if (fn > fy) break;
        y = std::move(next);
        bool done = fy - fn <= 1e-15 * std::max(1.0, fy) && step < 1e-12;
        fy = fn;
        if (done) break;
    }
    for (size_t i = 0; i < P.size(); ++i) {
        if (wt(i) == 0.0) continue;
        double f = objective(P[i]);
        if (f < fy) {
            fy = f;
            y = P[i];
        }
    }
    return y;
}

namespace detail {

inline double binomial(size_t n, size_t k) {
    if (k > n) return 0.0;
    double r = 1.0;
    for (size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return r;
}

// number of set partitions of n items into at most k blocks
inline double partitions_at_most(size_t n, size_t k) {
    std::vector<std::vector<double>> S(n + 1, std::vector<double>(k + 1, 0.0));
    S[0][0] = 1.0;
    for (size_t i = 1; i <= n; ++i)
        for (size_t j = 1; j <= k; ++j) S[i][j] = j * S[i - 1][j] + S[i - 1][j - 1];
    double s = 0.0;
    for (size_t j = 1; j <= k; ++j) s += S[n][j];
    return s;
}

inline void pad_centers(std::vector<Point>& c, size_t k) {
    while (c.size() < k) c.push_back(c.front());
}

}  // namespace detail

constexpr double kOracleBound = 1e6;

// Exact oracle. k-means with n <= 12 enumerates every partition into at most
// k blocks; otherwise centers are restricted to data points, and k-median
// additionally refines each restricted optimum by per-cluster medians.
inline OracleResult exhaustive_kmeans(std::span<const Point> P, int k, CostKind kind) {
    if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
    OracleResult best;
    best.method = OracleMethod::kExhaustive;
    if (P.empty()) return best;
    const size_t n = P.size();
    const size_t kk = static_cast<size_t>(k);

    if (kind == CostKind::kMeans && n <= 12) {
        if (detail::partitions_at_most(n, kk) > kOracleBound)
            throw Error(ErrorCode::kTooLarge, "oracle bound exceeded");
        std::vector<int> label(n, 0);
        best.cost = std::numeric_limits<double>::infinity();
        const size_t d = P[0].size();
        // restricted growth strings: label[i] <= 1 + max(label[0..i-1])
        std::vector<int> maxpre(n, 0);
        for (;;) {
            int blocks = 1;
            for (size_t i = 0; i < n; ++i) blocks = std::max(blocks, label[i] + 1);
            std::vector<Point> sum(blocks, Point(d, 0.0));
            std::vector<double> sq(blocks, 0.0), cnt(blocks, 0.0);
            for (size_t i = 0; i < n; ++i) {
                for (size_t j = 0; j < d; ++j) sum[label[i]][j] += P[i][j];
                sq[label[i]] += squared_norm(P[i]);
                cnt[label[i]] += 1.0;
            }
            double c = 0.0;
            for (int b = 0; b < blocks; ++b) c += std::max(0.0, sq[b] - squared_norm(sum[b]) / cnt[b]);
            if (c < best.cost) {
                best.cost = c;
                best.centers.clear();
                for (int b = 0; b < blocks; ++b) {
                    Point m = sum[b];
                    for (double& x : m) x /= cnt[b];
                    best.centers.push_back(m);
                }
            }
            // next string
            long i = static_cast<long>(n) - 1;
            while (i > 0) {
                int cap = std::min<int>(maxpre[i] + 1, k - 1);
                if (label[i] < cap) break;
                --i;
            }
            if (i <= 0) break;
            ++label[i];
            for (size_t j = i + 1; j < n; ++j) {
                label[j] = 0;
                maxpre[j] = std::max(maxpre[j - 1], label[j - 1]);
            }
        }
        // the exact cost is recomputed directly; the identity above only ranks
        best.cost = cost(P, best.centers, kind);
        detail::pad_centers(best.centers, kk);
        return best;
    }

    std::vector<Point> cand;
    for (const Point& p : P)
        if (std::find(cand.begin(), cand.end(), p) == cand.end()) cand.push_back(p);
    const size_t m = cand.size();
    const size_t kc = std::min(kk, m);
    if (detail::binomial(m, kc) > kOracleBound) throw Error(ErrorCode::kTooLarge, "oracle bound exceeded");
    std::vector<size_t> pick(kc);
    for (size_t i = 0; i < kc; ++i) pick[i] = i;
    best.cost = std::numeric_limits<double>::infinity();
    std::vector<Point> S(kc);
    for (;;) {
        for (size_t i = 0; i < kc; ++i) S[i] = cand[pick[i]];
        double c = cost(P, S, kind);
        if (c < best.cost) {
            best.cost = c;
            best.centers = S;
        }
        long i = static_cast<long>(kc) - 1;
        while (i >= 0 && pick[i] == m - kc + static_cast<size_t>(i)) --i;
        if (i < 0) break;
        ++pick[i];
        for (size_t j = i + 1; j < kc; ++j) pick[j] = pick[j - 1] + 1;
    }
    if (kind == CostKind::kMedian) {
        std::vector<Point> C = best.centers;
        for (int round = 0; round < 50; ++round) {
            std::vector<std::vector<Point>> groups(C.size());
            for (const Point& p : P) groups[nearest_center(p, C)].push_back(p);
            std::vector<Point> next = C;
            for (size_t j = 0; j < C.size(); ++j)
                if (!groups[j].empty()) next[j] = weiszfeld_median(groups[j]);
            double c = cost(P, next, kind);
            if (!(c < best.cost - 1e-15)) break;
            best.cost = c;
            best.centers = next;
            C = next;
        }
    }
    detail::pad_centers(best.centers, kk);
    return best;
}

struct RefineOptions {
    int restarts = 10;
    int max_iter = 100;
    uint64_t seed = 0;
    std::vector<double>* trace = nullptr;  // per-iteration costs of every restart
};

// Weighted k-means++ style seeding followed by Lloyd steps (means for
// k-means, one guarded Weiszfeld step per cluster for k-median). Returns the
// best restart.
inline OracleResult refine_kmeans(std::span<const Point> P, std::span<const double> w, int k,
                                  CostKind kind, const RefineOptions& opt = {}) {
    if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
    if (!w.empty() && w.size() != P.size()) throw Error(ErrorCode::kInvalidArgument, "weight count mismatch");
    OracleResult best;
    best.method = OracleMethod::kMultiRestartRefine;
    if (P.empty()) return best;
    const size_t d = P[0].size();
    auto wt = [&](size_t i) { return w.empty() ? 1.0 : w[i]; };
    double total = 0.0;
    for (size_t i = 0; i < P.size(); ++i) {
        if (wt(i) < 0.0) throw Error(ErrorCode::kInvalidArgument, "negative weight");
        total += wt(i);
    }
    if (total == 0.0) {
        best.centers.assign(static_cast<size_t>(k), Point(d, 0.0));
        return best;
    }

    best.cost = std::numeric_limits<double>::infinity();
    for (int r = 0; r < std::max(1, opt.restarts); ++r) {
        SplitMix64 rng(derive_seed(opt.seed, "restart" + std::to_string(r)));
        std::vector<Point> C;
        std::vector<double> dist(P.size(), std::numeric_limits<double>::infinity());
        auto pick_weighted = [&](auto weight_of) {
            double s = 0.0;
            for (size_t i = 0; i < P.size(); ++i) s += weight_of(i);
            if (!(s > 0.0)) return P.size();
            double u = uniform01(rng) * s;
            for (size_t i = 0; i < P.size(); ++i) {
                u -= weight_of(i);
                if (u <= 0.0 && weight_of(i) > 0.0) return i;
            }
            for (size_t i = P.size(); i-- > 0;)
                if (weight_of(i) > 0.0) return i;
            return P.size();
        };
        size_t first = pick_weighted([&](size_t i) { return wt(i); });
        C.push_back(P[first]);
        while (C.size() < static_cast<size_t>(k)) {
            for (size_t i = 0; i < P.size(); ++i) dist[i] = std::min(dist[i], squared_distance(P[i], C.back()));
            size_t next = pick_weighted([&](size_t i) {
                double dd = kind == CostKind::kMeans ? dist[i] : std::sqrt(dist[i]);
                return wt(i) * dd;
            });
            if (next == P.size()) {
                C.push_back(C.back());  // fewer distinct points than k
            } else {
                C.push_back(P[next]);
            }
        }

        double cur = weighted_cost(P, w, C, kind);
        if (opt.trace) opt.trace->push_back(cur);
        for (int it = 0; it < opt.max_iter; ++it) {
            std::vector<std::vector<size_t>> members(C.size());
            for (size_t i = 0; i < P.size(); ++i)
                if (wt(i) > 0.0) members[nearest_center(P[i], C)].push_back(i);
            std::vector<Point> next = C;
            for (size_t j = 0; j < C.size(); ++j) {
                if (members[j].empty()) continue;
                std::vector<Point> pts;
                std::vector<double> ws;
                for (size_t i : members[j]) {
                    pts.push_back(P[i]);
                    ws.push_back(wt(i));
                }
                if (kind == CostKind::kMeans) {
                    next[j] = weighted_mean(pts, ws);
                } else {
                    Point cand = weiszfeld_median(pts, ws, 5);
                    if (weighted_cost(pts, ws, std::span<const Point>(&cand, 1), kind) <
                        weighted_cost(pts, ws, std::span<const Point>(&C[j], 1), kind))
                        next[j] = cand;
                }
            }
            double nc = weighted_cost(P, w, next, kind);
            if (nc > cur * (1.0 + 1e-12) + 1e-300)
                throw std::logic_error("refinement step increased the cost");
            if (opt.trace) opt.trace->push_back(nc);
            bool stop = cur - nc <= 1e-12 * cur;
            C = std::move(next);
            cur = nc;
            if (stop) break;
        }
        if (cur < best.cost) {
            best.cost = cur;
            best.centers = C;
        }
    }
    return best;
}

}  // namespace cdpk

#endif  // CDPK_BASELINE_HPP
