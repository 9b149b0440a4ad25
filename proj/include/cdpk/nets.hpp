#ifndef CDPK_NETS_HPP
#define CDPK_NETS_HPP

#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <ostream>
#include <type_traits>
#include <vector>

#include "cdpk/core.hpp"

namespace cdpk {

constexpr int kMaxDim = 8;

// Integer coordinates plus a level. Ordering is lexicographic on (level, idx)
// and serves as the canonical id order everywhere ties are broken.
template <class Tag>
struct LatticeKey {
    int32_t level = 0;
    std::array<int32_t, kMaxDim> idx{};

    auto operator<=>(const LatticeKey&) const = default;
};

template <class Tag>
uint64_t stable_hash(const LatticeKey<Tag>& k) {
    uint64_t h = static_cast<uint64_t>(k.level) + 0x51ed27;
    for (size_t j = 0; j < k.idx.size(); j += 2) {
        uint64_t pair = (static_cast<uint64_t>(static_cast<uint32_t>(k.idx[j])) << 32) |
                        static_cast<uint32_t>(k.idx[j + 1]);
        h = SplitMix64::mix(h ^ pair) + 0x9e3779b97f4a7c15ULL;
    }
    return SplitMix64::mix(h);
}

struct NetTag;
struct CellTag;
using NetId = LatticeKey<NetTag>;
using CellId = LatticeKey<CellTag>;

}  // namespace cdpk

template <class Tag>
struct std::hash<cdpk::LatticeKey<Tag>> {
    size_t operator()(const cdpk::LatticeKey<Tag>& k) const {
        return static_cast<size_t>(cdpk::stable_hash(k));
    }
};

namespace cdpk {

// Upper-triangular lattice basis (columns are generators). Coverage and
// minimum distance are for the unscaled lattice.
struct Lattice {
    int dim = 0;
    std::array<std::array<double, kMaxDim>, kMaxDim> basis{};
    double covering_radius = 0.0;
    double min_distance = 0.0;

    static Lattice for_dimension(int d) {
        if (d < 1 || d >= kMaxDim)
            throw Error(ErrorCode::kInvalidArgument, "nets support dimensions 1..7");
        Lattice L;
        L.dim = d;
        auto& B = L.basis;
        if (d == 1) {
            B[0][0] = 1.0;
            L.covering_radius = 0.5;
            L.min_distance = 1.0;
        } else if (d == 2) {
            // hexagonal
            B[0][0] = 1.0;
            B[0][1] = 0.5;
            B[1][1] = std::sqrt(3.0) / 2.0;
            L.covering_radius = 1.0 / std::sqrt(3.0);
            L.min_distance = 1.0;
        } else if (d == 3) {
            // body-centred cubic
            B[0][0] = 1.0;
            B[1][1] = 1.0;
            B[0][2] = 0.5;
            B[1][2] = 0.5;
            B[2][2] = 0.5;
            L.covering_radius = std::sqrt(5.0) / 4.0;
            L.min_distance = std::sqrt(3.0) / 2.0;
        } else {
            // D_d: integer vectors with even coordinate sum
            B[0][0] = 2.0;
            for (int j = 1; j < d; ++j) {
                B[j - 1][j] = 1.0;
                B[j][j] = 1.0;
            }
            L.covering_radius = std::max(1.0, std::sqrt(static_cast<double>(d)) / 2.0);
            L.min_distance = std::sqrt(2.0);
        }
        return L;
    }
};

inline double net_delta(int level) { return std::ldexp(1.0, -(level + 1)); }

inline double net_value(int level, double count, CostKind kind) {
    return kind == CostKind::kMeans ? std::ldexp(count, -2 * level) : std::ldexp(count, -level);
}

class NetIndex {
public:
    static constexpr double kCoverSlack = 0.999;

    NetIndex(int dim, int levels) : lattice_(Lattice::for_dimension(dim)), levels_(levels) {
        if (levels < 1) throw Error(ErrorCode::kInvalidArgument, "need at least one level");
    }

    int dim() const { return lattice_.dim; }
    int levels() const { return levels_; }
    const Lattice& lattice() const { return lattice_; }

    double delta(int level) const { return net_delta(level); }
    double covering_radius(int level) const { return kCoverSlack * delta(level); }
    double scale(int level) const { return covering_radius(level) / lattice_.covering_radius; }

    Point position(const NetId& z) const {
        Point x(dim(), 0.0);
        position(z, x);
        return x;
    }

    void position(const NetId& z, std::span<double> x) const {
        const int d = dim();
        const double s = scale(z.level);
        for (int r = 0; r < d; ++r) {
            double v = 0.0;
            for (int j = r; j < d; ++j) v += lattice_.basis[r][j] * z.idx[d - 1 - j];
            x[r] = s * v;
        }
    }

    bool in_domain(const NetId& z) const {
        return norm(position(z)) <= 1.0 + covering_radius(z.level);
    }

    // Visits net points of `level` within `radius` of `c`, in ascending id order.
    // A callback returning bool stops the walk by returning false.
    template <class F>
    void for_each_within(int level, std::span<const double> c, double radius, F&& f) const {
        check_level(level);
        const int d = dim();
        const double s = scale(level);
        NetId key;
        key.level = level;
        std::array<double, kMaxDim> acc{};
        enumerate(d - 1, radius * radius, s, c, radius, key, acc, f);
    }

    std::vector<NetId> within(int level, std::span<const double> c, double radius) const {
        std::vector<NetId> out;
        for_each_within(level, c, radius, [&](const NetId& z) { out.push_back(z); });
        return out;
    }

    std::vector<NetId> build_level(int level, size_t max_points = 20'000'000) const {
        check_level(level);
        double est = std::pow(2.0 * (1.0 + 2.0 * covering_radius(level)) / scale(level), dim());
        if (est > 4.0 * static_cast<double>(max_points))
            throw Error(ErrorCode::kTooLarge, "level too large for full materialization");
        Point origin(dim(), 0.0);
        return within(level, origin, 1.0 + covering_radius(level));
    }

    std::vector<NetId> children(const NetId& z) const {
        if (z.level >= levels_) throw Error(ErrorCode::kLeaf, "leaf");
        return within(z.level + 1, position(z), children_radius(z.level));
    }

    double children_radius(int level) const { return 4.0 * std::ldexp(1.0, -level); }

    std::vector<NetId> covering_nets(std::span<const double> p, int level) const {
        return within(level, p, std::ldexp(1.0, -level));
    }

    void dump_level_csv(std::ostream& os, int level) const {
        char buf[64];
        for (const NetId& z : build_level(level)) {
            for (int j = 0; j < dim(); ++j) os << (j ? ":" : "") << z.idx[j];
            os << ',' << level;
            for (double x : position(z)) {
                std::snprintf(buf, sizeof buf, ",%.17g", x);
                os << buf;
            }
            os << '\n';
        }
    }

private:
    void check_level(int level) const {
        if (level < 1 || level > levels_)
            throw Error(ErrorCode::kInvalidArgument, "net level out of range");
    }

    // Fincke-Pohst style walk: coordinate j is pinned once all coordinates
    // above it are fixed, so only lattice points inside the ball are visited.
    template <class F>
    bool enumerate(int j, double rem2, double s, std::span<const double> c, double radius,
                   NetId& key, std::array<double, kMaxDim>& acc, F& f) const {
        const int d = dim();
        if (j < 0) {
            double buf[kMaxDim] = {};
            std::span<double> x(buf, static_cast<size_t>(d));
            position(key, x);
            if (distance(x, c) <= radius && norm(x) <= 1.0 + covering_radius(key.level)) {
                if constexpr (std::is_same_v<std::invoke_result_t<F&, const NetId&>, bool>) {
                    return f(key);
                } else {
                    f(key);
                }
            }
            return true;
        }
        const double diag = s * lattice_.basis[j][j];
        const double base = s * acc[j];
        const double rj = std::sqrt(std::max(rem2, 0.0)) + 1e-12;
        const int64_t lo = static_cast<int64_t>(std::ceil((c[j] - rj - base) / diag - 1e-9));
        const int64_t hi = static_cast<int64_t>(std::floor((c[j] + rj - base) / diag + 1e-9));
        for (int64_t m = lo; m <= hi; ++m) {
            const double xj = base + diag * static_cast<double>(m);
            const double r2 = rem2 - (xj - c[j]) * (xj - c[j]);
            if (r2 < -1e-12) continue;
            key.idx[d - 1 - j] = static_cast<int32_t>(m);
            for (int r = 0; r < j; ++r) acc[r] += lattice_.basis[r][j] * static_cast<double>(m);
            bool go = enumerate(j - 1, r2, s, c, radius, key, acc, f);
            for (int r = 0; r < j; ++r) acc[r] -= lattice_.basis[r][j] * static_cast<double>(m);
            if (!go) return false;
        }
        key.idx[d - 1 - j] = 0;
        return true;
    }

    Lattice lattice_;
    int levels_;
};

}  // namespace cdpk

#endif  // CDPK_NETS_HPP
