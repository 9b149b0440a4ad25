#ifndef CDPK_DP_COUNTING_HPP
#define CDPK_DP_COUNTING_HPP

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cdpk/core.hpp"

namespace cdpk {

inline double laplace_from_uniform(double u, double scale) {
    // 1 - 2|u - 1/2| = 2 min(u, 1 - u), exact in floating point for u in (0, 1)
    double mag = -scale * std::log(2.0 * std::min(u, 1.0 - u));
    return u < 0.5 ? -mag : mag;
}

template <class URBG>
double laplace(double scale, URBG& rng, bool enabled = true) {
    if (!(scale > 0.0) || !std::isfinite(scale))
        throw Error(ErrorCode::kInvalidArgument, "laplace scale must be positive");
    double u = uniform01(rng);
    return enabled ? laplace_from_uniform(u, scale) : 0.0;
}

// Noise of the binary (dyadic tree) mechanism. Every tree node owns one
// Laplace draw that is a pure function of (seed, epoch, level, index), so a
// key that was never touched still sees the same noise on every query.
//
// With a declared horizon H there is one tree over [1, 2^ceil(log2 H)].
// Without one, epoch e covers [2^e, 2^{e+1}-1] with its own tree of e+1
// levels and finished epochs contribute their root.
class DyadicNoise {
public:
    DyadicNoise() = default;
    DyadicNoise(double epsilon, double l_bound, std::optional<int64_t> horizon, bool enabled)
        : epsilon_(epsilon), l_bound_(l_bound), horizon_(horizon), enabled_(enabled) {
        if (!(epsilon > 0.0)) throw Error(ErrorCode::kInvalidArgument, "epsilon must be positive");
        if (!(l_bound > 0.0)) throw Error(ErrorCode::kInvalidArgument, "L must be positive");
        if (horizon) {
            if (*horizon < 1) throw Error(ErrorCode::kInvalidArgument, "horizon must be >= 1");
            height_ = std::bit_width(static_cast<uint64_t>(*horizon - 1));
        }
    }

    bool enabled() const { return enabled_; }
    double epsilon() const { return epsilon_; }
    double l_bound() const { return l_bound_; }
    std::optional<int64_t> horizon() const { return horizon_; }

    // Each value enters one node per level and a neighbouring stream changes
    // at most two values (insert and its delete), hence the factor 2.
    double node_scale(int levels) const { return 2.0 * l_bound_ * levels / epsilon_; }

    double prefix(uint64_t key_seed, int64_t t) const { return sum_nodes(key_seed, nodes(t)); }

    struct Node {
        uint64_t salt;
        double scale;
    };

    // the dyadic nodes whose sum forms the prefix noise at t
    std::vector<Node> nodes(int64_t t) const {
        std::vector<Node> out;
        if (!enabled_ || t <= 0) return out;
        if (horizon_) {
            if (t > *horizon_) throw Error(ErrorCode::kInvalidArgument, "horizon exceeded");
            tree_nodes(kKnownEpoch, height_, static_cast<uint64_t>(t), out);
            return out;
        }
        const int e = std::bit_width(static_cast<uint64_t>(t)) - 1;
        for (int f = 0; f < e; ++f) out.push_back({salt(f, f, 0), node_scale(f + 1)});
        tree_nodes(e, e, static_cast<uint64_t>(t) - (uint64_t{1} << e) + 1, out);
        return out;
    }

    static double sum_nodes(uint64_t key_seed, const std::vector<Node>& ns) {
        double s = 0.0;
        for (const Node& n : ns) s += draw(key_seed, n);
        return s;
    }

    static double draw(uint64_t key_seed, const Node& n) {
        return laplace_from_uniform(uniform_open(SplitMix64::mix(key_seed ^ n.salt)), n.scale);
    }

    // number of nodes a value at time t lands in
    int levels_at(int64_t t) const {
        if (horizon_) return height_ + 1;
        return std::bit_width(static_cast<uint64_t>(t));
    }

private:
    static constexpr int kKnownEpoch = 1 << 20;

    // nodes covering [1, u] in a tree with `height` levels above the leaves
    void tree_nodes(int epoch, int height, uint64_t u, std::vector<Node>& out) const {
        const double sc = node_scale(height + 1);
        uint64_t start = 0;
        for (int lvl = height; lvl >= 0; --lvl) {
            if (u & (uint64_t{1} << lvl)) {
                out.push_back({salt(epoch, lvl, start >> lvl), sc});
                start += uint64_t{1} << lvl;
            }
        }
    }

    static uint64_t salt(int epoch, int level, uint64_t index) {
        return hash_combine(static_cast<uint64_t>(epoch) * 131 + level, index);
    }

    double epsilon_ = 1.0;
    double l_bound_ = 1.0;
    std::optional<int64_t> horizon_;
    bool enabled_ = true;
    int height_ = 0;
};

// log T (sqrt(log T) + log(1/beta)) with log base 2 for T and natural for beta
inline double counter_error_shape(double T, double beta) {
    double lt = std::max(1.0, std::log2(T));
    return lt * (std::sqrt(lt) + std::log(1.0 / beta));
}

namespace detail {

inline void write_raw(std::ostream& os, const void* p, size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!os) throw Error(ErrorCode::kIo, "write failed");
}
inline void read_raw(std::istream& is, void* p, size_t n) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!is) throw Error(ErrorCode::kIo, "truncated blob");
}
template <class T>
void put(std::ostream& os, const T& v) {
    write_raw(os, &v, sizeof v);
}
template <class T>
T get(std::istream& is) {
    T v;
    read_raw(is, &v, sizeof v);
    return v;
}

constexpr char kMagic[8] = {'C', 'D', 'P', 'K', 'H', 'I', 'S', 'T'};
constexpr uint32_t kBlobVersion = 1;

}  // namespace detail

struct CounterConfig {
    double epsilon = 1.0;
    double l_bound = 1.0;
    std::optional<int64_t> horizon;
    bool noise = true;
    uint64_t seed = 0;
};

class NoisyCounter {
public:
    explicit NoisyCounter(const CounterConfig& cfg)
        : cfg_(cfg), noise_(cfg.epsilon, cfg.l_bound, cfg.horizon, cfg.noise) {}

    void update(double x) {
        if (!(std::fabs(x) <= cfg_.l_bound)) throw Error(ErrorCode::kSensitivity, "sensitivity violation");
        ++t_;
        sum_ += x;
    }

    double query() const { return sum_ + noise_.prefix(cfg_.seed, t_); }
    double exact() const { return sum_; }
    int64_t t() const { return t_; }
    const CounterConfig& config() const { return cfg_; }

private:
    CounterConfig cfg_;
    DyadicNoise noise_;
    int64_t t_ = 0;
    double sum_ = 0.0;
};

struct HistogramConfig {
    double epsilon = 1.0;
    int fan_out = 1;
    int width = 1;
    double l_bound = 1.0;
    std::optional<int64_t> horizon;
    bool noise = true;
    uint64_t seed = 0;
};

// Counters keyed by Key, one per (key, component). Each update touches at most
// fan_out keys and every counter runs at epsilon / fan_out. Components are
// separate mechanisms sharing the key space; the caller budgets each one.
template <class Key>
class KeyedHistogram {
    static_assert(std::is_trivially_copyable_v<Key>, "keys are serialized bytewise");

public:
    using LogFn = std::function<void(int64_t, const Key&, std::span<const double>)>;

    explicit KeyedHistogram(const HistogramConfig& cfg) : cfg_(cfg) {
        if (cfg.fan_out < 1) throw Error(ErrorCode::kInvalidArgument, "fan-out must be >= 1");
        if (cfg.width < 1) throw Error(ErrorCode::kInvalidArgument, "width must be >= 1");
        noise_ = DyadicNoise(cfg.epsilon / cfg.fan_out, cfg.l_bound, cfg.horizon, cfg.noise);
    }

    const HistogramConfig& config() const { return cfg_; }
    double counter_epsilon() const { return cfg_.epsilon / cfg_.fan_out; }
    int64_t t() const { return t_; }
    size_t materialized() const { return sums_.size(); }

    void set_log(LogFn fn) { log_ = std::move(fn); }

    // keys.size() rows of `width` values each; advances time by one step
    void update(std::span<const Key> keys, std::span<const double> values) {
        const size_t w = static_cast<size_t>(cfg_.width);
        if (values.size() != keys.size() * w)
            throw Error(ErrorCode::kInvalidArgument, "value count does not match keys");
        if (keys.size() > static_cast<size_t>(cfg_.fan_out))
            throw Error(ErrorCode::kFanOut, "fan-out exceeds b");
        for (double v : values)
            if (!(std::fabs(v) <= cfg_.l_bound))
                throw Error(ErrorCode::kSensitivity, "sensitivity violation");
        if (keys.size() > 1) {
            std::unordered_set<Key> seen(keys.begin(), keys.end());
            if (seen.size() != keys.size())
                throw Error(ErrorCode::kInvalidArgument, "duplicate key in one update");
        }
        ++t_;
        for (size_t i = 0; i < keys.size(); ++i) {
            auto& row = sums_[keys[i]];
            if (row.empty()) row.assign(w, 0.0);
            for (size_t c = 0; c < w; ++c) row[c] += values[i * w + c];
            if (log_) log_(t_, keys[i], values.subspan(i * w, w));
        }
    }

    void update(const std::vector<std::pair<Key, double>>& touched) {
        std::vector<Key> keys;
        std::vector<double> vals;
        for (const auto& [k, v] : touched) {
            keys.push_back(k);
            vals.push_back(v);
        }
        update(keys, vals);
    }

    void tick() { update(std::span<const Key>{}, std::span<const double>{}); }

    double exact(const Key& k, int component = 0) const {
        auto it = sums_.find(k);
        return it == sums_.end() ? 0.0 : it->second[component];
    }

    double noise(const Key& k, int component = 0) const {
        if (!cfg_.noise) return 0.0;
        return noise_.prefix(component_seed(key_hash(k), component), t_);
    }

    // Adds query(k, c) for every component to out[c]. `nodes` must come from
    // current_nodes() at the current time.
    void accumulate(const Key& k, const std::vector<DyadicNoise::Node>& nodes, std::span<double> out) const {
        auto it = sums_.find(k);
        if (it != sums_.end())
            for (size_t c = 0; c < out.size(); ++c) out[c] += it->second[c];
        if (!cfg_.noise) return;
        const uint64_t kh = key_hash(k);
        for (size_t c = 0; c < out.size(); ++c)
            out[c] += DyadicNoise::sum_nodes(component_seed(kh, static_cast<int>(c)), nodes);
    }

    std::vector<DyadicNoise::Node> current_nodes() const { return noise_.nodes(t_); }

    double query(const Key& k, int component = 0) const { return exact(k, component) + noise(k, component); }

    bool touched(const Key& k) const { return sums_.count(k) != 0; }

    template <class F>
    void for_each_touched(F&& f) const {
        for (const auto& [k, row] : sums_) f(k, std::span<const double>(row));
    }

    void serialize(std::ostream& os) const {
        detail::write_raw(os, detail::kMagic, sizeof detail::kMagic);
        detail::put(os, detail::kBlobVersion);
        detail::put(os, static_cast<uint32_t>(sizeof(Key)));
        detail::put(os, cfg_.epsilon);
        detail::put(os, static_cast<int32_t>(cfg_.fan_out));
        detail::put(os, static_cast<int32_t>(cfg_.width));
        detail::put(os, cfg_.l_bound);
        detail::put(os, static_cast<int64_t>(cfg_.horizon.value_or(-1)));
        detail::put(os, static_cast<uint8_t>(cfg_.noise));
        detail::put(os, cfg_.seed);
        detail::put(os, t_);
        detail::put(os, static_cast<uint64_t>(sums_.size()));
        std::vector<const std::pair<const Key, std::vector<double>>*> rows;
        for (const auto& kv : sums_) rows.push_back(&kv);
        std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->first < b->first; });
        for (auto* kv : rows) {
            detail::put(os, kv->first);
            detail::write_raw(os, kv->second.data(), kv->second.size() * sizeof(double));
        }
    }

    static KeyedHistogram deserialize(std::istream& is) {
        char magic[8];
        detail::read_raw(is, magic, sizeof magic);
        if (std::memcmp(magic, detail::kMagic, sizeof magic) != 0)
            throw Error(ErrorCode::kIo, "not a histogram blob");
        if (detail::get<uint32_t>(is) != detail::kBlobVersion)
            throw Error(ErrorCode::kIo, "unsupported blob version");
        if (detail::get<uint32_t>(is) != sizeof(Key)) throw Error(ErrorCode::kIo, "key size mismatch");
        HistogramConfig cfg;
        cfg.epsilon = detail::get<double>(is);
        cfg.fan_out = detail::get<int32_t>(is);
        cfg.width = detail::get<int32_t>(is);
        cfg.l_bound = detail::get<double>(is);
        int64_t h = detail::get<int64_t>(is);
        if (h >= 0) cfg.horizon = h;
        cfg.noise = detail::get<uint8_t>(is) != 0;
        cfg.seed = detail::get<uint64_t>(is);
        KeyedHistogram out(cfg);
        out.t_ = detail::get<int64_t>(is);
        uint64_t n = detail::get<uint64_t>(is);
        for (uint64_t i = 0; i < n; ++i) {
            Key k = detail::get<Key>(is);
            std::vector<double> row(static_cast<size_t>(cfg.width));
            detail::read_raw(is, row.data(), row.size() * sizeof(double));
            out.sums_.emplace(k, std::move(row));
        }
        return out;
    }

private:
    uint64_t key_hash(const Key& k) const {
        uint64_t h;
        if constexpr (std::is_integral_v<Key>) {
            h = SplitMix64::mix(static_cast<uint64_t>(k));
        } else {
            h = stable_hash(k);
        }
        return hash_combine(cfg_.seed, h);
    }

    static uint64_t component_seed(uint64_t kh, int component) {
        return hash_combine(kh, static_cast<uint64_t>(component));
    }

    HistogramConfig cfg_;
    DyadicNoise noise_;
    int64_t t_ = 0;
    std::unordered_map<Key, std::vector<double>> sums_;
    LogFn log_;
};

}  // namespace cdpk

#endif  // CDPK_DP_COUNTING_HPP
