#ifndef CDPK_BOOSTING_HPP
#define CDPK_BOOSTING_HPP

#include <cmath>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cdpk/core.hpp"
#include "cdpk/high_dim.hpp"

namespace cdpk {

// sum_{i>=1} i^{-s} for s > 1: direct terms plus an Euler-Maclaurin tail
inline double zeta(double s) {
    if (!(s > 1.0)) throw Error(ErrorCode::kInvalidArgument, "zeta needs s > 1");
    const int N = 1000;
    double sum = 0.0;
    for (int i = N - 1; i >= 1; --i) sum += std::pow(static_cast<double>(i), -s);
    double n = N;
    sum += std::pow(n, 1.0 - s) / (s - 1.0) + 0.5 * std::pow(n, -s) + s * std::pow(n, -s - 1.0) / 12.0 -
           s * (s + 1.0) * (s + 2.0) * std::pow(n, -s - 3.0) / 720.0;
    return sum;
}

struct CopySchedule {
    double kappa = 1.0;
    double beta = 0.01;
    double c1 = 0.0;
    double c2 = 0.0;
    double s_kappa = 0.0;

    CopySchedule() : CopySchedule(1.0, 0.01) {}
    CopySchedule(double kappa_, double beta_) : kappa(kappa_), beta(beta_) {
        if (!(kappa > 0.0)) throw Error(ErrorCode::kInvalidArgument, "kappa must be positive");
        c1 = 3.0 / std::log(2.5);
        c2 = std::log(M_PI * M_PI / (6.0 * beta)) / std::log(2.5);
        s_kappa = zeta(1.0 + kappa);
    }

    int copies_at(int64_t t) const {
        double lt = std::floor(std::log2(static_cast<double>(std::max<int64_t>(t, 1))));
        return std::max(1, static_cast<int>(std::ceil(c1 * lt + c2)));
    }

    // fraction of the budget for copy (or epoch) i, 1-based
    double share(int i) const { return 1.0 / (s_kappa * std::pow(static_cast<double>(i), 1.0 + kappa)); }
};

struct BoostParams {
    HighDimParams base;  // seed, nmax and horizon are filled in per copy
    double epsilon = 1.0;
    double kappa = 1.0;
    std::optional<int64_t> horizon;
    std::optional<int64_t> nmax;
    std::optional<int> copies;
    bool boosting = true;
    uint64_t seed = 0;
    int64_t initial_n_guess = 100;
};

struct BoostStep {
    Solution solution;
    int chosen = 0;
    int copies = 0;
    int degenerate = 0;
    std::vector<double> estimates;
};

// Live multiset in arrival order; deletes remove the oldest equal copy.
class ArrivalLog {
public:
    void insert(const Point& p) {
        by_point_[p].push_back(next_);
        order_.emplace(next_++, p);
    }
    void erase(const Point& p) {
        auto it = by_point_.find(p);
        if (it == by_point_.end() || it->second.empty())
            throw Error(ErrorCode::kMalformedStream, "delete of absent point");
        order_.erase(it->second.front());
        it->second.pop_front();
        if (it->second.empty()) by_point_.erase(it);
    }
    size_t size() const { return order_.size(); }
    template <class F>
    void for_each(F&& f) const {
        for (const auto& [seq, p] : order_) f(p);
    }
    std::vector<Point> points() const {
        std::vector<Point> out;
        for_each([&](const Point& p) { out.push_back(p); });
        return out;
    }

private:
    uint64_t next_ = 0;
    std::map<uint64_t, Point> order_;
    std::map<Point, std::deque<uint64_t>> by_point_;
};

inline void replay_prefix(const ArrivalLog& live, HighDimClustering& copy) {
    live.for_each([&](const Point& p) { copy.update(Op::kInsert, p); });
}

// Runs copies with decaying budgets and emits, at every step, the solution
// whose private cost estimate is smallest. Unknown horizon: copies are added
// as the schedule grows and catch up by replaying the live set. Unknown nmax:
// everything restarts when the live set outgrows the current guess.
class Booster {
public:
    explicit Booster(const BoostParams& p)
        : p_(p), sched_(p.kappa, p.base.beta), ledger_(p.epsilon) {
        if (p.copies && *p.copies < 1) throw Error(ErrorCode::kInvalidArgument, "zero copies configured");
        n_guess_ = p.nmax ? *p.nmax : p.initial_n_guess;
        start_epoch();
    }

    void update(Op op, const Point& p) {
        ++t_;
        if (op == Op::kInsert) {
            live_.insert(p);
            if (!p_.nmax && static_cast<int64_t>(live_.size()) > n_guess_) {
                while (static_cast<int64_t>(live_.size()) > n_guess_) n_guess_ *= 2;
                start_epoch();  // the replay already contains p
                grow();
                return;
            }
        } else if (op == Op::kDelete) {
            live_.erase(p);
        }
        for (auto& c : copies_) c->update(op, p);
        grow();
    }

    BoostStep step() const {
        BoostStep s;
        s.copies = static_cast<int>(copies_.size());
        double best = std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < copies_.size(); ++i) {
            HighDimOutput o = copies_[i]->step();
            s.estimates.push_back(o.est_cost);
            if (o.est_cost < best) {
                best = o.est_cost;
                s.chosen = static_cast<int>(i);
                s.solution.centers = std::move(o.centers);
                s.solution.est_cost = std::max(0.0, o.est_cost);
                s.degenerate = o.degenerate;
            }
        }
        s.solution.kind = p_.base.kind;
        return s;
    }

    const PrivacyBudget& ledger() const { return ledger_; }
    const ArrivalLog& live() const { return live_; }
    int copy_count() const { return static_cast<int>(copies_.size()); }
    int epoch() const { return epoch_; }
    const CopySchedule& schedule() const { return sched_; }
    const HighDimClustering& copy(int i) const { return *copies_[static_cast<size_t>(i)]; }
    int64_t n_guess() const { return n_guess_; }

private:
    int target_copies() const {
        if (!p_.boosting) return 1;
        if (p_.copies) return *p_.copies;
        if (p_.horizon) return sched_.copies_at(*p_.horizon);
        return sched_.copies_at(std::max<int64_t>(t_, 1));
    }

    void start_epoch() {
        ++epoch_;
        double share = p_.nmax ? p_.epsilon : p_.epsilon * sched_.share(epoch_);
        epoch_budget_ = &ledger_.child("epoch" + std::to_string(epoch_), share);
        copies_.clear();
        grow();
    }

    void grow() {
        int want = target_copies();
        while (static_cast<int>(copies_.size()) < want) {
            int i = static_cast<int>(copies_.size()) + 1;
            double share = p_.boosting ? epoch_budget_->epsilon() * sched_.share(i) : epoch_budget_->epsilon();
            PrivacyBudget& b = epoch_budget_->child("copy" + std::to_string(i), share);
            HighDimParams hp = p_.base;
            hp.seed = derive_seed(p_.seed, "epoch" + std::to_string(epoch_) + "/copy" + std::to_string(i));
            hp.nmax = n_guess_;
            // a fixed tree is only valid if the copy's clock can never pass T
            bool fresh = t_ == 0 && epoch_ == 1;
            hp.horizon = fresh ? p_.horizon : std::nullopt;
            auto c = std::make_unique<HighDimClustering>(hp, b);
            replay_prefix(live_, *c);
            copies_.push_back(std::move(c));
        }
    }

    BoostParams p_;
    CopySchedule sched_;
    PrivacyBudget ledger_;
    PrivacyBudget* epoch_budget_ = nullptr;
    std::vector<std::unique_ptr<HighDimClustering>> copies_;
    ArrivalLog live_;
    int64_t t_ = 0;
    int epoch_ = 0;
    int64_t n_guess_ = 100;
};

}  // namespace cdpk

#endif  // CDPK_BOOSTING_HPP
