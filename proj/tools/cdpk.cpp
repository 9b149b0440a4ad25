#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cdpk/runner.hpp"

int main(int argc, char** argv) {
    cdpk::RunConfig cfg;
    CLI::App app{"Continual-observation private k-means / k-median over an update stream"};
    app.set_config("--config", "", "TOML-style config file; flags win", false);
    app.set_version_flag("--version", cdpk::kVersion);

    std::string stream_path, out_path, manifest_path, cost = "kmeans", noise = "on";
    std::optional<int64_t> nmax, t_max;
    std::optional<int> copies, dim, k_prime;
    std::optional<double> theta;
    bool no_dim_reduce = false;

    app.add_option("--stream", stream_path, "JSON-lines update stream")->required()->envname("CDPK_STREAM");
    app.add_option("--out", out_path, "output CSV (default stdout)")->envname("CDPK_OUT");
    app.add_option("--manifest", manifest_path, "manifest JSON (default <out>.manifest.json)")
        ->envname("CDPK_MANIFEST");
    app.add_option("--epsilon", cfg.epsilon, "privacy budget")->envname("CDPK_EPSILON");
    app.add_option("--k", cfg.k, "number of centers")->envname("CDPK_K");
    app.add_option("--lambda", cfg.lambda, "radius of the input ball")->envname("CDPK_LAMBDA");
    app.add_option("--alpha", cfg.alpha, "precision, in (0, 1/4]")->envname("CDPK_ALPHA");
    app.add_option("--beta", cfg.beta, "failure probability")->envname("CDPK_BETA");
    app.add_option("--kappa", cfg.kappa, "budget decay exponent")->envname("CDPK_KAPPA");
    app.add_option("--cost", cost, "kmeans or kmedian")
        ->check(CLI::IsMember({"kmeans", "kmedian"}))
        ->envname("CDPK_COST");
    app.add_flag("--no-dim-reduce", no_dim_reduce, "skip the random projection")->envname("CDPK_NO_DIM_REDUCE");
    app.add_option("--seed", cfg.seed, "top-level seed")->envname("CDPK_SEED");
    app.add_option("--nmax", nmax, "maximum dataset size (unknown: restart on doubling)")->envname("CDPK_NMAX");
    app.add_option("--t-max", t_max, "horizon T (unknown: doubling)")->envname("CDPK_T_MAX");
    app.add_option("--noise", noise, "on, or off for exact debugging")
        ->check(CLI::IsMember({"on", "off"}))
        ->envname("CDPK_NOISE");
    app.add_option("--copies", copies, "number of boosting copies")->envname("CDPK_COPIES");
    app.add_flag("--debug-true-cost", cfg.debug_true_cost, "append the non-private cost column")
        ->envname("CDPK_DEBUG_TRUE_COST");
    app.add_flag("--private-release", cfg.private_release, "mark the run for release")
        ->envname("CDPK_PRIVATE_RELEASE");
    app.add_option("--dim", dim, "input dimension when the stream has no points")->envname("CDPK_DIM");
    app.add_option("--max-proj-dim", cfg.max_proj_dim, "cap on the projected dimension (0: none)")
        ->envname("CDPK_MAX_PROJ_DIM");
    app.add_option("--c-proj", cfg.c_proj, "projection dimension constant")->envname("CDPK_C_PROJ");
    app.add_option("--k-prime", k_prime, "coreset size override")->envname("CDPK_K_PRIME");
    app.add_option("--k-prime-cap", cfg.k_prime_cap, "cap on the coreset size (0: 4k)")->envname("CDPK_K_PRIME_CAP");
    app.add_option("--theta", theta, "threshold override")->envname("CDPK_THETA");
    app.add_option("--restarts", cfg.restarts, "refiner restarts")->envname("CDPK_RESTARTS");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : cdpk::kExitUsage;
    }

    cfg.cost_kind = cost == "kmedian" ? cdpk::CostKind::kMedian : cdpk::CostKind::kMeans;
    cfg.noise = noise == "on";
    cfg.dim_reduce = !no_dim_reduce;
    cfg.nmax = nmax;
    cfg.t_max = t_max;
    cfg.copies = copies;
    cfg.dim = dim;
    cfg.k_prime = k_prime;
    cfg.theta = theta;

    std::ifstream in(stream_path);
    if (!in) {
        std::cerr << "cannot open " << stream_path << '\n';
        return cdpk::kExitIo;
    }
    std::ofstream out_file;
    std::ostream* out = &std::cout;
    if (!out_path.empty()) {
        out_file.open(out_path);
        if (!out_file) {
            std::cerr << "cannot open " << out_path << '\n';
            return cdpk::kExitIo;
        }
        out = &out_file;
    }
    if (manifest_path.empty() && !out_path.empty()) manifest_path = out_path + ".manifest.json";
    std::ofstream man_file;
    if (!manifest_path.empty()) {
        man_file.open(manifest_path);
        if (!man_file) {
            std::cerr << "cannot open " << manifest_path << '\n';
            return cdpk::kExitIo;
        }
    }
    return cdpk::run(cfg, in, *out, manifest_path.empty() ? nullptr : &man_file, std::cerr);
}
