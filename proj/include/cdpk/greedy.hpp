#ifndef CDPK_GREEDY_HPP
#define CDPK_GREEDY_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "cdpk/core.hpp"
#include "cdpk/nets.hpp"

namespace cdpk {

class NoisyValueTable {
public:
    explicit NoisyValueTable(double theta = 1.0) : theta_(theta) {}

    double theta() const { return theta_; }

    void set(const NetId& z, double v) {
        if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "non-finite noisy value");
        values_[z] = std::max(0.0, v);
    }

    double get(const NetId& z) const {
        auto it = values_.find(z);
        return it == values_.end() ? 0.0 : it->second;
    }

    const std::unordered_map<NetId, double>& entries() const { return values_; }

private:
    double theta_;
    std::unordered_map<NetId, double> values_;
};

inline bool check_threshold(double nval, double val, double theta) {
    if (nval >= theta) return nval >= val / 2.0 && nval <= 2.0 * val;
    return val <= 2.0 * theta;
}

inline bool check_threshold(const std::unordered_map<NetId, double>& nval,
                            const std::unordered_map<NetId, double>& val, double theta) {
    auto lookup = [](const auto& m, const NetId& z) {
        auto it = m.find(z);
        return it == m.end() ? 0.0 : it->second;
    };
    for (const auto& [z, v] : nval)
        if (!check_threshold(v, lookup(val, z), theta)) return false;
    for (const auto& [z, v] : val)
        if (!check_threshold(lookup(nval, z), v, theta)) return false;
    return true;
}

struct GreedyResult {
    std::vector<Point> centers;
    std::vector<NetId> center_ids;
    std::vector<NetId> start_ids;  // z_j^1
    int degenerate = 0;
};

inline double removal_radius(int level) { return 89.0 * std::ldexp(1.0, -level); }

// Picks k bottom-level net points. Each round starts at the available net
// point with the largest noisy value and walks down through max-value
// children; a net point stops being available once a chosen center lies in
// its 89-neighborhood.
inline GreedyResult recursive_greedy(const NetIndex& net, const NoisyValueTable& nval, int k) {
    if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
    GreedyResult out;
    const int L = net.levels();

    auto available = [&](const NetId& z) {
        double buf[kMaxDim] = {};
        std::span<double> x(buf, static_cast<size_t>(net.dim()));
        net.position(z, x);
        double r = removal_radius(z.level);
        for (const Point& c : out.centers)
            if (distance(x, c) <= r) return false;
        return true;
    };

    // candidates in selection order: value descending, then id ascending
    std::vector<std::pair<double, NetId>> ranked;
    for (const auto& [z, v] : nval.entries())
        if (v > 0.0) ranked.emplace_back(v, z);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    std::vector<Point> ranked_pos;
    ranked_pos.reserve(ranked.size());
    for (const auto& r : ranked) ranked_pos.push_back(net.position(r.second));
    std::vector<char> removed(ranked.size(), 0);
    std::vector<size_t> checked_upto(ranked.size(), 0);  // centers already tested
    size_t cursor = 0;

    for (int j = 0; j < k; ++j) {
        bool found = false;
        NetId start;
        for (size_t r = cursor; r < ranked.size() && !found; ++r) {
            if (removed[r]) continue;
            const double rad = removal_radius(ranked[r].second.level);
            for (size_t c = checked_upto[r]; c < out.centers.size(); ++c)
                if (distance(ranked_pos[r], out.centers[c]) <= rad) {
                    removed[r] = 1;
                    break;
                }
            checked_upto[r] = out.centers.size();
            if (removed[r]) continue;
            start = ranked[r].second;
            found = true;
        }
        while (cursor < ranked.size() && removed[cursor]) ++cursor;
        if (!found) {
            // everything left reads 0: smallest available id wins
            Point origin(net.dim(), 0.0);
            for (int i = 1; i <= L && !found; ++i) {
                // a removal ball that swallows the whole level rules it out
                bool covered = false;
                for (const Point& c : out.centers)
                    if (norm(c) + 1.0 + net.covering_radius(i) < removal_radius(i)) covered = true;
                if (covered) continue;
                net.for_each_within(i, origin, 1.0 + net.covering_radius(i), [&](const NetId& z) {
                    if (!available(z)) return true;
                    start = z;
                    found = true;
                    return false;
                });
            }
        }
        if (!found) {
            out.centers.push_back(out.centers.back());
            out.center_ids.push_back(out.center_ids.back());
            out.start_ids.push_back(out.start_ids.back());
            ++out.degenerate;
            continue;
        }

        NetId z = start;
        while (z.level < L) {
            NetId pick;
            double pv = -1.0;
            for (const NetId& c : net.children(z)) {
                double v = nval.get(c);
                if (v > pv) {
                    pv = v;
                    pick = c;
                }
            }
            if (!available(pick)) throw std::logic_error("descent reached an unavailable net point");
            z = pick;
        }
        Point c = net.position(z);
        if (distance(net.position(start), c) > 8.0 * std::ldexp(1.0, -start.level))
            throw std::logic_error("descent left the 8-neighborhood of its start");
        out.start_ids.push_back(start);
        out.center_ids.push_back(z);
        out.centers.push_back(std::move(c));
    }
    return out;
}

}  // namespace cdpk

#endif  // CDPK_GREEDY_HPP
