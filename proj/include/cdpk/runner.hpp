#ifndef CDPK_RUNNER_HPP
#define CDPK_RUNNER_HPP

#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdpk/boosting.hpp"
#include "cdpk/core.hpp"

namespace cdpk {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitMalformed = 2,
    kExitOutsideBall = 3,
    kExitBudget = 4,
    kExitIo = 5,
};

struct RunConfig {
    double epsilon = 1.0;
    int k = 2;
    double lambda = 1.0;
    double alpha = 0.25;
    double beta = 0.01;
    double kappa = 1.0;
    CostKind cost_kind = CostKind::kMeans;
    bool dim_reduce = true;
    uint64_t seed = 1;
    std::optional<int64_t> nmax;
    std::optional<int64_t> t_max;
    bool noise = true;
    std::optional<int> copies;
    bool debug_true_cost = false;
    bool private_release = false;
    std::optional<int> dim;

    // implementation knobs
    int max_proj_dim = 2;
    double c_proj = 8.0;
    int k_prime_cap = 0;
    std::optional<int> k_prime;
    std::optional<double> theta;
    int restarts = 10;
};

inline std::string validate_config(const RunConfig& c) {
    if (!(c.epsilon > 0.0)) return "epsilon must be > 0";
    if (!(c.alpha > 0.0 && c.alpha <= 0.25)) return "alpha must be in (0, 1/4]";
    if (!(c.beta > 0.0 && c.beta < 1.0)) return "beta must be in (0, 1)";
    if (!(c.kappa > 0.0)) return "kappa must be > 0";
    if (!(c.lambda > 0.0)) return "lambda must be > 0";
    if (c.k < 1) return "k must be >= 1";
    if (c.copies && *c.copies < 1) return "copies must be >= 1";
    if (c.nmax && *c.nmax < 1) return "nmax must be >= 1";
    if (c.t_max && *c.t_max < 1) return "t-max must be >= 1";
    if (c.debug_true_cost && c.private_release) return "--debug-true-cost is refused for a private-release run";
    return {};
}

struct StreamError {
    int code = kExitOk;
    std::string message;
};

// Parses JSON lines {"t": int, "op": "insert"|"delete"|"noop", "point": [...]}.
// Points are normalized by lambda. Blank lines are skipped.
inline Stream parse_stream(std::istream& in, double lambda, StreamError& err) {
    Stream s;
    std::string line;
    long lineno = 0;
    size_t dim = 0;
    auto fail = [&](int code, const std::string& msg) {
        err.code = code;
        err.message = "line " + std::to_string(lineno) + ": " + msg;
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            fail(kExitMalformed, "not a JSON object");
            return s;
        }
        UpdateEvent e;
        if (!j.contains("t") || !j["t"].is_number_integer() || j["t"].get<int64_t>() < 1) {
            fail(kExitMalformed, "missing or non-positive integer t");
            return s;
        }
        e.t = j["t"].get<int64_t>();
        std::string op = j.value("op", std::string());
        if (op == "insert") {
            e.op = Op::kInsert;
        } else if (op == "delete") {
            e.op = Op::kDelete;
        } else if (op == "noop") {
            e.op = Op::kNoop;
        } else {
            fail(kExitMalformed, "op must be insert, delete or noop");
            return s;
        }
        if (e.op != Op::kNoop) {
            if (!j.contains("point") || !j["point"].is_array() || j["point"].empty()) {
                fail(kExitMalformed, "missing point");
                return s;
            }
            Point raw;
            for (const auto& x : j["point"]) {
                if (!x.is_number()) {
                    fail(kExitMalformed, "point coordinates must be numbers");
                    return s;
                }
                raw.push_back(x.get<double>());
            }
            try {
                e.point = normalize(raw, lambda);
            } catch (const Error&) {
                fail(kExitOutsideBall, "point outside declared ball");
                return s;
            }
        }
        if (!s.events.empty() && e.t <= s.events.back().t) {
            fail(kExitMalformed, "timesteps must strictly increase");
            return s;
        }
        if (e.op != Op::kNoop) {
            if (dim == 0) dim = e.point.size();
            if (e.point.size() != dim) {
                fail(kExitMalformed, "dimension changed within stream");
                return s;
            }
        }
        s.events.push_back(std::move(e));
    }
    return s;
}

inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline void emit_header(std::ostream& os, int k, int d, bool true_cost) {
    os << "t,k,est_cost";
    for (int j = 0; j < k; ++j)
        for (int c = 0; c < d; ++c) os << ",c" << j << "_x" << c;
    if (true_cost) os << ",true_cost";
    os << '\n';
    if (!os) throw Error(ErrorCode::kIo, "write failed");
}

inline void emit_row(std::ostream& os, int64_t t, const Solution& s, double est_cost,
                     std::optional<double> true_cost) {
    os << t << ',' << s.centers.size() << ',' << format_double(std::max(0.0, est_cost));
    for (const Point& c : s.centers)
        for (double x : c) os << ',' << format_double(x);
    if (true_cost) os << ',' << format_double(*true_cost);
    os << '\n';
    if (!os) throw Error(ErrorCode::kIo, "write failed");
}

inline BoostParams boost_params(const RunConfig& c, int dim) {
    BoostParams bp;
    bp.base.dim = dim;
    bp.base.k = c.k;
    bp.base.alpha = c.alpha;
    bp.base.beta = c.beta;
    bp.base.kind = c.cost_kind;
    bp.base.noise = c.noise;
    bp.base.projection.enabled = c.dim_reduce;
    bp.base.projection.max_dim = c.max_proj_dim;
    bp.base.projection.c_proj = c.c_proj;
    bp.base.k_prime_cap = c.k_prime_cap;
    bp.base.k_prime = c.k_prime;
    bp.base.theta = c.theta;
    bp.base.restarts = c.restarts;
    bp.epsilon = c.epsilon;
    bp.kappa = c.kappa;
    bp.horizon = c.t_max;
    bp.nmax = c.nmax;
    bp.copies = c.copies;
    bp.boosting = c.cost_kind == CostKind::kMeans;
    bp.seed = c.seed;
    return bp;
}

inline nlohmann::json manifest_json(const RunConfig& c, int dim, int64_t rows, const Booster* b) {
    nlohmann::json m;
    m["tool"] = "cdpk";
    m["version"] = kVersion;
    m["release"] = c.private_release ? "private-release" : "debug";
    m["seed"] = c.seed;
    nlohmann::json cfg;
    cfg["epsilon"] = c.epsilon;
    cfg["k"] = c.k;
    cfg["lambda"] = c.lambda;
    cfg["alpha"] = c.alpha;
    cfg["beta"] = c.beta;
    cfg["kappa"] = c.kappa;
    cfg["cost"] = c.cost_kind == CostKind::kMeans ? "kmeans" : "kmedian";
    cfg["dim_reduce"] = c.dim_reduce;
    cfg["nmax"] = c.nmax ? nlohmann::json(*c.nmax) : nlohmann::json(nullptr);
    cfg["t_max"] = c.t_max ? nlohmann::json(*c.t_max) : nlohmann::json(nullptr);
    cfg["noise"] = c.noise ? "on" : "off";
    cfg["copies"] = c.copies ? nlohmann::json(*c.copies) : nlohmann::json(nullptr);
    cfg["debug_true_cost"] = c.debug_true_cost;
    cfg["max_proj_dim"] = c.max_proj_dim;
    cfg["c_proj"] = c.c_proj;
    cfg["k_prime_cap"] = c.k_prime_cap;
    cfg["restarts"] = c.restarts;
    m["config"] = cfg;
    m["dim"] = dim;
    m["rows"] = rows;
    if (b) {
        nlohmann::json led = nlohmann::json::array();
        for (const auto& e : b->ledger().flatten()) led.push_back({{"label", e.label}, {"epsilon", e.epsilon}});
        m["ledger"] = led;
        m["epsilon_total"] = b->ledger().epsilon();
        m["epsilon_allocated"] = b->ledger().allocated();
        m["ledger_ok"] = b->ledger().check();
        m["copies"] = b->copy_count();
        m["epochs"] = b->epoch();
        if (b->copy_count() > 0) {
            m["projected_dim"] = b->copy(0).projection().out_dim;
            m["k_prime"] = b->copy(0).low().params().k_prime;
            m["levels"] = b->copy(0).low().params().levels;
        }
    }
    return m;
}

// Drives one run. Returns an exit code; `err` receives a one-line reason.
inline int run(const RunConfig& cfg, std::istream& in, std::ostream& csv, std::ostream* manifest,
               std::ostream& err) {
    std::string bad = validate_config(cfg);
    if (!bad.empty()) {
        err << "usage error: " << bad << '\n';
        return kExitUsage;
    }
    StreamError se;
    Stream stream = parse_stream(in, cfg.lambda, se);
    if (se.code != kExitOk) {
        err << se.message << '\n';
        return se.code;
    }
    stream.horizon = cfg.t_max;
    stream.nmax = cfg.nmax;
    try {
        validate(stream);
    } catch (const Error& e) {
        err << "malformed stream: " << e.what() << '\n';
        return kExitMalformed;
    }

    int dim = cfg.dim.value_or(1);
    for (const auto& e : stream.events)
        if (e.op != Op::kNoop) {
            dim = static_cast<int>(e.point.size());
            break;
        }
    if (cfg.dim && *cfg.dim != dim) {
        err << "usage error: --dim does not match the stream\n";
        return kExitUsage;
    }

    const double cost_scale = cfg.cost_kind == CostKind::kMeans ? cfg.lambda * cfg.lambda : cfg.lambda;
    std::unique_ptr<Booster> booster;
    int64_t rows = 0;
    try {
        emit_header(csv, cfg.k, dim, cfg.debug_true_cost);
        if (!stream.events.empty()) {
            booster = std::make_unique<Booster>(boost_params(cfg, dim));
            size_t next = 0;
            const int64_t last = stream.events.back().t;
            for (int64_t t = 1; t <= last; ++t) {
                if (next < stream.events.size() && stream.events[next].t == t) {
                    booster->update(stream.events[next].op, stream.events[next].point);
                    ++next;
                } else {
                    booster->update(Op::kNoop, {});
                }
                BoostStep s = booster->step();
                std::optional<double> truth;
                if (cfg.debug_true_cost) {
                    auto pts = booster->live().points();
                    truth = cost(pts, s.solution.centers, cfg.cost_kind) * cost_scale;
                }
                Solution out = s.solution;
                for (Point& c : out.centers)
                    for (double& x : c) x *= cfg.lambda;
                emit_row(csv, t, out, s.solution.est_cost * cost_scale, truth);
                ++rows;
            }
            if (!booster->ledger().check()) throw Error(ErrorCode::kBudgetExceeded, "ledger check failed");
        }
        csv.flush();
        if (!csv) throw Error(ErrorCode::kIo, "write failed");
        if (manifest) {
            *manifest << manifest_json(cfg, dim, rows, booster.get()).dump(2) << '\n';
            if (!*manifest) throw Error(ErrorCode::kIo, "manifest write failed");
        }
    } catch (const Error& e) {
        err << e.what() << '\n';
        switch (e.code()) {
            case ErrorCode::kBudgetExceeded: return kExitBudget;
            case ErrorCode::kIo: return kExitIo;
            case ErrorCode::kOutsideBall: return kExitOutsideBall;
            case ErrorCode::kMalformedStream: return kExitMalformed;
            default: return kExitUsage;
        }
    }
    return kExitOk;
}

}  // namespace cdpk

#endif  // CDPK_RUNNER_HPP
