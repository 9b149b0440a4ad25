#ifndef CDPK_DECOMPOSITION_HPP
#define CDPK_DECOMPOSITION_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "cdpk/core.hpp"
#include "cdpk/dp_counting.hpp"
#include "cdpk/nets.hpp"

namespace cdpk {

// Dyadic cube grid clipped to B(0,1). Level-i cells have side 2^{-i}/sqrt(d),
// so their diameter is 2^{-i}; level 0 is the ball itself.
class CellDecomposition {
public:
    CellDecomposition(int dim, int levels)
        : dim_(dim), levels_(levels), sqrt_d_(std::sqrt(static_cast<double>(dim))) {
        if (dim < 1 || dim > kMaxDim) throw Error(ErrorCode::kInvalidArgument, "bad cell dimension");
        if (levels < 1) throw Error(ErrorCode::kInvalidArgument, "need at least one level");
    }

    int dim() const { return dim_; }
    int levels() const { return levels_; }
    double side(int level) const { return std::ldexp(1.0, -level) / sqrt_d_; }

    CellId locate(std::span<const double> p, int level) const {
        CellId c;
        c.level = level;
        if (level == 0) return c;
        for (int j = 0; j < dim_; ++j)
            c.idx[j] = static_cast<int32_t>(std::floor(std::ldexp(p[j] * sqrt_d_, level)));
        return c;
    }

    CellId parent(const CellId& c) const {
        if (c.level == 0) throw Error(ErrorCode::kInvalidArgument, "root has no parent");
        CellId p;
        p.level = c.level - 1;
        if (p.level > 0)
            for (int j = 0; j < dim_; ++j) p.idx[j] = c.idx[j] >> 1;  // arithmetic shift floors
        return p;
    }

    // one key per level 1..L: the histogram fan-out is exactly L
    std::vector<CellId> keys_for(std::span<const double> p) const {
        std::vector<CellId> out;
        out.reserve(levels_);
        for (int i = 1; i <= levels_; ++i) out.push_back(locate(p, i));
        return out;
    }

    double lo(const CellId& c, int j) const { return std::ldexp(static_cast<double>(c.idx[j]), -c.level) / sqrt_d_; }
    double hi(const CellId& c, int j) const { return std::ldexp(static_cast<double>(c.idx[j]) + 1.0, -c.level) / sqrt_d_; }

    double distance_to_box(std::span<const double> v, const CellId& c) const {
        if (c.level == 0) return std::max(0.0, norm(v) - 1.0);
        double s = 0.0;
        for (int j = 0; j < dim_; ++j) {
            double l = lo(c, j), h = hi(c, j);
            double g = v[j] < l ? l - v[j] : (v[j] > h ? v[j] - h : 0.0);
            s += g * g;
        }
        return std::sqrt(s);
    }

    bool meets_ball(const CellId& c) const {
        if (c.level == 0) return true;
        double s = 0.0;
        for (int j = 0; j < dim_; ++j) {
            double l = lo(c, j), h = hi(c, j);
            double g = l > 0.0 ? l : (h < 0.0 ? -h : 0.0);
            s += g * g;
        }
        return s <= 1.0;
    }

    // lower corner if it lies in the ball, else the point of the cell nearest
    // the origin (which is in the ball whenever the cell meets it)
    Point representative(const CellId& c) const {
        Point v(dim_, 0.0);
        representative(c, v);
        return v;
    }

    void representative(const CellId& c, std::span<double> v) const {
        std::fill(v.begin(), v.end(), 0.0);
        if (c.level == 0) return;
        for (int j = 0; j < dim_; ++j) v[j] = lo(c, j);
        if (norm(v) <= 1.0) return;
        for (int j = 0; j < dim_; ++j) v[j] = std::clamp(0.0, lo(c, j), hi(c, j));
    }

    template <class F>
    void for_each_child(const CellId& c, F&& f) const {
        if (c.level >= levels_) return;
        if (c.level == 0) {
            const int32_t m = static_cast<int32_t>(std::ceil(2.0 * sqrt_d_));
            CellId k;
            k.level = 1;
            grid(0, -m, m - 1, k, f);
            return;
        }
        for (uint32_t mask = 0; mask < (1u << dim_); ++mask) {
            CellId k;
            k.level = c.level + 1;
            for (int j = 0; j < dim_; ++j) k.idx[j] = 2 * c.idx[j] + static_cast<int32_t>((mask >> j) & 1u);
            if (meets_ball(k)) f(k);
        }
    }

private:
    template <class F>
    void grid(int j, int32_t lo_m, int32_t hi_m, CellId& k, F& f) const {
        if (j == dim_) {
            if (meets_ball(k)) f(k);
            return;
        }
        for (int32_t m = lo_m; m <= hi_m; ++m) {
            k.idx[j] = m;
            grid(j + 1, lo_m, hi_m, k, f);
        }
        k.idx[j] = 0;
    }

    int dim_;
    int levels_;
    double sqrt_d_;
};

inline int neighborhood_ell(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::kInvalidArgument, "alpha must be in (0,1)");
    return static_cast<int>(std::ceil(10.0 / alpha - 1e-12));
}

// Upper bound on |parts| for this grid: a part's parent has v within
// (ell+1) 2^{-i} of a center cell, so it lies inside a cube of side
// 2(ell+2) 2^{-i}, which holds at most (2(ell+2)sqrt(d)+2)^d cells; each has
// 2^d children.
inline double partition_size_ceiling(int k, int ell, int dim, int levels) {
    double per = 2.0 * (2.0 * (ell + 2) * std::sqrt(static_cast<double>(dim)) + 2.0);
    return static_cast<double>(k) * std::pow(per, dim) * levels;
}

struct ClusterPartition {
    std::vector<CellId> parts;
    std::vector<int> assign;
    int ell = 0;
    std::unordered_map<CellId, size_t> index;

    // index of the part containing p, or -1; `hits` counts how many levels matched
    long locate(const CellDecomposition& dec, std::span<const double> p, int* hits = nullptr) const {
        long found = -1;
        int n = 0;
        for (int i = 0; i <= dec.levels(); ++i) {
            auto it = index.find(dec.locate(p, i));
            if (it != index.end()) {
                if (found < 0) found = static_cast<long>(it->second);
                ++n;
            }
        }
        if (hits) *hits = n;
        return found;
    }
};

// Answers partition questions for a fixed center set without enumerating the
// whole partition; build() enumerates it by recursive descent.
class CenterStructure {
public:
    CenterStructure(const CellDecomposition& dec, std::vector<Point> centers, double alpha)
        : dec_(&dec), centers_(std::move(centers)), ell_(neighborhood_ell(alpha)) {
        if (centers_.empty()) throw Error(ErrorCode::kInvalidArgument, "no centers");
        center_cells_.resize(dec.levels() + 1);
        for (int i = 0; i <= dec.levels(); ++i)
            for (const Point& c : centers_) center_cells_[i].push_back(dec.locate(c, i));
    }

    int ell() const { return ell_; }
    const std::vector<Point>& centers() const { return centers_; }
    const CellDecomposition& decomposition() const { return *dec_; }

    bool has_center(const CellId& a) const {
        if (a.level == 0) return true;
        double buf[kMaxDim] = {};
        std::span<double> v(buf, static_cast<size_t>(dec_->dim()));
        dec_->representative(a, v);
        double r = ell_ * std::ldexp(1.0, -a.level);
        for (const CellId& cc : center_cells_[a.level])
            if (dec_->distance_to_box(v, cc) <= r) return true;
        return false;
    }

    bool is_part(const CellId& a) const {
        if (a.level == 0) return false;
        if (!has_center(dec_->parent(a))) return false;
        return a.level == dec_->levels() || !has_center(a);
    }

    int assign(const CellId& a) const {
        return nearest_center(dec_->representative(a), centers_);
    }

    ClusterPartition build(size_t max_parts = 50'000'000) const {
        ClusterPartition out;
        out.ell = ell_;
        CellId root;
        visit(root, out, max_parts);
        out.index.reserve(out.parts.size());
        for (size_t i = 0; i < out.parts.size(); ++i) out.index.emplace(out.parts[i], i);
        return out;
    }

    // visits each part once together with its assigned center
    template <class F>
    void for_each_part(F&& f) const {
        CellId root;
        walk(root, f);
    }

private:
    template <class F>
    void walk(const CellId& a, F& f) const {
        if (a.level > 0 && (a.level == dec_->levels() || !has_center(a))) {
            f(a, assign(a));
            return;
        }
        dec_->for_each_child(a, [&](const CellId& c) { walk(c, f); });
    }

    void visit(const CellId& a, ClusterPartition& out, size_t max_parts) const {
        auto add = [&](const CellId& c, int j) {
            if (out.parts.size() >= max_parts) throw Error(ErrorCode::kTooLarge, "partition too large");
            out.parts.push_back(c);
            out.assign.push_back(j);
        };
        walk(a, add);
    }

    const CellDecomposition* dec_;
    std::vector<Point> centers_;
    int ell_;
    std::vector<std::vector<CellId>> center_cells_;
};

inline ClusterPartition build_partition(const std::vector<Point>& centers, double alpha,
                                        const CellDecomposition& dec) {
    return CenterStructure(dec, centers, alpha).build();
}

// Per-center sums of every histogram component over the parts assigned to
// that center: sums[j][c].
struct ClusterSums {
    std::vector<std::vector<double>> sums;
};

enum class SumPath { kAuto, kEnumerate, kTouched };

// With noise on every part is queried, touched or not. With noise off only
// touched cells can be nonzero, so it suffices to test those for membership.
inline ClusterSums cluster_sums(const CenterStructure& cs, const KeyedHistogram<CellId>& h,
                                SumPath path = SumPath::kAuto) {
    const size_t k = cs.centers().size();
    const int w = h.config().width;
    ClusterSums out;
    out.sums.assign(k, std::vector<double>(static_cast<size_t>(w), 0.0));
    if (path == SumPath::kAuto) path = h.config().noise ? SumPath::kEnumerate : SumPath::kTouched;
    if (path == SumPath::kEnumerate) {
        const auto nodes = h.current_nodes();
        cs.for_each_part([&](const CellId& a, int j) { h.accumulate(a, nodes, out.sums[j]); });
    } else {
        if (h.config().noise) throw Error(ErrorCode::kInvalidArgument, "touched path needs noise off");
        std::vector<std::pair<CellId, std::span<const double>>> cells;
        h.for_each_touched([&](const CellId& a, std::span<const double> row) { cells.emplace_back(a, row); });
        // fixed order keeps floating sums reproducible
        std::sort(cells.begin(), cells.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
        for (const auto& [a, row] : cells) {
            if (!cs.is_part(a)) continue;
            int j = cs.assign(a);
            for (int c = 0; c < w; ++c) out.sums[j][c] += row[c];
        }
    }
    return out;
}

}  // namespace cdpk

#endif  // CDPK_DECOMPOSITION_HPP
