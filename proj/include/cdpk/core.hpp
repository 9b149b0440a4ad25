#ifndef CDPK_CORE_HPP
#define CDPK_CORE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cdpk {

using Point = std::vector<double>;

enum class CostKind { kMeans, kMedian };

enum class ErrorCode {
    kInvalidArgument,
    kOutsideBall,
    kMalformedStream,
    kBudgetExceeded,
    kSensitivity,
    kFanOut,
    kLeaf,
    kTooLarge,
    kIo,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

inline double squared_norm(std::span<const double> a) {
    double s = 0.0;
    for (double x : a) s += x * x;
    return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(squared_norm(a)); }

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double distance(std::span<const double> a, std::span<const double> b) {
    return std::sqrt(squared_distance(a, b));
}

// distance to the nearest center, squared for k-means
inline double point_cost(std::span<const double> p, std::span<const Point> centers,
                         CostKind kind) {
    if (centers.empty()) throw Error(ErrorCode::kInvalidArgument, "no centers");
    double best = std::numeric_limits<double>::infinity();
    for (const Point& c : centers) best = std::min(best, squared_distance(p, c));
    return kind == CostKind::kMeans ? best : std::sqrt(best);
}

inline int nearest_center(std::span<const double> p, std::span<const Point> centers) {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < centers.size(); ++j) {
        double d = squared_distance(p, centers[j]);
        if (d < bd) {
            bd = d;
            best = static_cast<int>(j);
        }
    }
    return best;
}

inline double cost(std::span<const Point> P, std::span<const Point> S, CostKind kind) {
    if (S.empty()) throw Error(ErrorCode::kInvalidArgument, "no centers");
    double total = 0.0;
    for (const Point& p : P) total += point_cost(p, S, kind);
    return total;
}

inline Point normalize(const Point& raw, double lambda) {
    if (!(lambda > 0.0)) throw Error(ErrorCode::kInvalidArgument, "lambda must be positive");
    double n = norm(raw);
    if (!std::isfinite(n) || n > lambda)
        throw Error(ErrorCode::kOutsideBall, "point outside declared ball");
    Point p(raw);
    for (double& x : p) x /= lambda;
    return p;
}

inline Point clip_to_ball(Point p, double radius = 1.0) {
    double n = norm(p);
    if (n > radius) {
        for (double& x : p) x *= radius / n;
    }
    return p;
}

enum class Op { kInsert, kDelete, kNoop };

struct UpdateEvent {
    int64_t t = 0;
    Op op = Op::kNoop;
    Point point;
};

struct Stream {
    std::vector<UpdateEvent> events;
    std::optional<int64_t> horizon;
    std::optional<int64_t> nmax;
};

// Checks the well-formedness rules: increasing t, deletes of present points,
// constant dimension, declared nmax.
inline void validate(const Stream& s) {
    std::map<Point, int64_t> live;
    int64_t size = 0;
    int64_t last_t = 0;
    size_t dim = 0;
    for (const UpdateEvent& e : s.events) {
        if (e.t <= last_t)
            throw Error(ErrorCode::kMalformedStream, "timesteps must strictly increase");
        last_t = e.t;
        if (e.op == Op::kNoop) continue;
        if (e.point.empty()) throw Error(ErrorCode::kMalformedStream, "missing point");
        if (dim == 0) dim = e.point.size();
        if (e.point.size() != dim)
            throw Error(ErrorCode::kMalformedStream, "dimension changed within stream");
        if (e.op == Op::kInsert) {
            ++live[e.point];
            ++size;
            if (s.nmax && size > *s.nmax)
                throw Error(ErrorCode::kMalformedStream, "dataset exceeds declared nmax");
        } else {
            auto it = live.find(e.point);
            if (it == live.end())
                throw Error(ErrorCode::kMalformedStream, "delete of absent point");
            if (--it->second == 0) live.erase(it);
            --size;
        }
    }
    if (s.horizon && last_t > *s.horizon)
        throw Error(ErrorCode::kMalformedStream, "stream exceeds declared horizon");
}

// Event-level neighbors: equal except for one insert (and possibly its later
// delete) present in exactly one of the two streams.
inline bool neighboring(const Stream& a, const Stream& b) {
    std::map<int64_t, const UpdateEvent*> ea, eb;
    for (const auto& e : a.events)
        if (e.op != Op::kNoop) ea[e.t] = &e;
    for (const auto& e : b.events)
        if (e.op != Op::kNoop) eb[e.t] = &e;

    struct Diff {
        int64_t t;
        const UpdateEvent* in_a;
        const UpdateEvent* in_b;
    };
    std::vector<Diff> diffs;
    auto same = [](const UpdateEvent* x, const UpdateEvent* y) {
        return x->op == y->op && x->point == y->point;
    };
    for (auto& [t, e] : ea) {
        auto it = eb.find(t);
        if (it == eb.end()) {
            diffs.push_back({t, e, nullptr});
        } else if (!same(e, it->second)) {
            return false;
        }
    }
    for (auto& [t, e] : eb)
        if (!ea.count(t)) diffs.push_back({t, nullptr, e});

    if (diffs.empty()) return true;
    if (diffs.size() > 2) return false;
    std::sort(diffs.begin(), diffs.end(), [](const Diff& x, const Diff& y) { return x.t < y.t; });
    const Diff& first = diffs[0];
    const UpdateEvent* ins = first.in_a ? first.in_a : first.in_b;
    if (ins->op != Op::kInsert) return false;
    if (diffs.size() == 1) return true;
    const Diff& second = diffs[1];
    bool same_side = (first.in_a != nullptr) == (second.in_a != nullptr);
    const UpdateEvent* del = second.in_a ? second.in_a : second.in_b;
    return same_side && del->op == Op::kDelete && del->point == ins->point;
}

// SplitMix64 as a UniformRandomBitGenerator; sub-seeds derive from labels so
// each mechanism owns an independent stream.
class SplitMix64 {
public:
    using result_type = uint64_t;
    explicit SplitMix64(uint64_t seed = 0) : state_(seed) {}
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<uint64_t>::max(); }
    result_type operator()() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }
    static uint64_t mix(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    uint64_t state_;
};

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
    return SplitMix64::mix(a ^ (SplitMix64::mix(b) + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

inline uint64_t derive_seed(uint64_t parent, std::string_view label) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return hash_combine(parent, h);
}

// uniform in the open interval (0,1) from the top 52 bits; with 53 bits the
// largest value would round to 1
inline double uniform_open(uint64_t bits) {
    return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

template <class URBG>
double uniform01(URBG& rng) {
    return uniform_open(rng());
}

template <class URBG>
double standard_normal(URBG& rng) {
    double u1 = uniform01(rng);
    double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Hierarchical sequential-composition ledger. Shares are fixed during setup;
// allocate() refuses anything that would push the sum past epsilon.
class PrivacyBudget {
public:
    struct Entry {
        std::string label;
        double epsilon;
    };

    explicit PrivacyBudget(double epsilon, std::string label = "total")
        : epsilon_(epsilon), label_(std::move(label)) {
        if (!(epsilon > 0.0) || !std::isfinite(epsilon))
            throw Error(ErrorCode::kInvalidArgument, "epsilon must be positive");
    }

    PrivacyBudget(const PrivacyBudget&) = delete;
    PrivacyBudget& operator=(const PrivacyBudget&) = delete;

    double epsilon() const { return epsilon_; }
    const std::string& label() const { return label_; }

    double allocated() const {
        double s = 0.0;
        for (const auto& e : entries_) s += e.epsilon;
        return s;
    }
    double remaining() const { return epsilon_ - allocated(); }

    double allocate(const std::string& label, double share) {
        if (!(share > 0.0) || !std::isfinite(share))
            throw Error(ErrorCode::kInvalidArgument, "budget share must be positive");
        if (allocated() + share > epsilon_ * (1.0 + kSlack))
            throw Error(ErrorCode::kBudgetExceeded,
                        "budget over-allocation at " + label_ + "/" + label);
        entries_.push_back({label, share});
        return share;
    }

    // reserves share here and hands back a nested ledger with that capacity
    PrivacyBudget& child(const std::string& label, double share) {
        allocate(label, share);
        children_.push_back(std::make_unique<PrivacyBudget>(share, label));
        child_entry_.push_back(entries_.size() - 1);
        return *children_.back();
    }

    // leaf allocations with full paths; nested ledgers are expanded
    std::vector<Entry> flatten() const {
        std::vector<Entry> out;
        flatten_into(label_, out);
        return out;
    }

    bool check() const {
        if (allocated() > epsilon_ * (1.0 + kSlack)) return false;
        for (const auto& c : children_)
            if (!c->check()) return false;
        return true;
    }

    static constexpr double kSlack = 1e-12;

private:
    void flatten_into(const std::string& prefix, std::vector<Entry>& out) const {
        for (size_t i = 0; i < entries_.size(); ++i) {
            const PrivacyBudget* sub = nullptr;
            for (size_t c = 0; c < children_.size(); ++c)
                if (child_entry_[c] == i) sub = children_[c].get();
            std::string path = prefix + "/" + entries_[i].label;
            if (sub) {
                size_t before = out.size();
                sub->flatten_into(path, out);
                if (out.size() == before) out.push_back({path + "/(unused)", 0.0});
            } else {
                out.push_back({path, entries_[i].epsilon});
            }
        }
    }

    double epsilon_;
    std::string label_;
    std::vector<Entry> entries_;
    std::vector<std::unique_ptr<PrivacyBudget>> children_;
    std::vector<size_t> child_entry_;
};

struct Solution {
    std::vector<Point> centers;
    CostKind kind = CostKind::kMeans;
    double est_cost = 0.0;
};

}  // namespace cdpk

#endif  // CDPK_CORE_HPP
