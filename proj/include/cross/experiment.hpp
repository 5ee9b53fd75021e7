#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cross/completion.hpp"
#include "cross/generators.hpp"
#include "cross/metrics.hpp"
#include "cross/rng.hpp"
#include "cross/scheme.hpp"

namespace cross {

inline const char* generator_kind_name(GeneratorKind k) {
    switch (k) {
        case GeneratorKind::gaussian_lowrank: return "gaussian_lowrank";
        case GeneratorKind::approx_lowrank: return "approx_lowrank";
        case GeneratorKind::nonneg_normalized: return "nonneg_normalized";
    }
    return "?";
}

inline const char* noise_kind_name(NoiseKind k) {
    switch (k) {
        case NoiseKind::none: return "none";
        case NoiseKind::gaussian: return "gaussian";
        case NoiseKind::poisson: return "poisson";
        case NoiseKind::multinomial: return "multinomial";
    }
    return "?";
}

// How a cell draws its Cross pattern: explicit (m, g) sizes or the rho rule.
struct SamplingPolicy {
    bool use_rho = false;
    double rho = 0.0;
    std::array<Index, 3> m{0, 0, 0};
    std::array<Index, 3> g{0, 0, 0};
};

// How a cell picks lambda: explicit values, or c * sqrt(p_t / m_t).
struct LambdaPolicy {
    bool use_values = false;
    double multiplier = 3.0;
    std::array<double, 3> values{0.0, 0.0, 0.0};

    std::array<double, 3> resolve(const Dims3& p, const std::array<Index, 3>& m) const {
        if (use_values) return values;
        auto lam = default_lambda(p, m);
        for (double& v : lam) v *= multiplier / 3.0;
        return lam;
    }
};

struct ExperimentCell {
    GeneratorSpec generator;
    SamplingPolicy sampling;
    NoiseSpec noise;
    LambdaPolicy lambda;
    double singularity_rel_tol = 1e-12;
    double pinv_rel_tol = 1e-10;
};

struct ExperimentRow {
    std::size_t cell = 0;
    std::size_t replicate = 0;
    GeneratorKind gen_kind = GeneratorKind::gaussian_lowrank;
    Dims3 p{0, 0, 0};
    Ranks3 r{0, 0, 0};
    double alpha = 0.0;
    std::array<Index, 3> m{0, 0, 0};
    std::array<Index, 3> g{0, 0, 0};
    NoiseKind noise_kind = NoiseKind::none;
    double sigma = 0.0;
    double intensity = 0.0;
    long long total_count = 0;
    std::array<double, 3> lambda{0.0, 0.0, 0.0};
    Ranks3 r_hat{0, 0, 0};
    double relative_hs_loss = 0.0;
    double wall_time_seconds = 0.0;
    bool ok = false;
    std::string status;  // "ok" or "error: ..."
};

struct RunOptions {
    int jobs = 1;
    bool record_timing = false;  // off keeps CSV output byte-identical across runs
};

namespace detail {

inline ExperimentRow run_replicate(const ExperimentCell& cell, std::size_t cell_idx,
                                   std::size_t rep, std::uint64_t seed,
                                   const RunOptions& opts) {
    ExperimentRow row;
    row.cell = cell_idx;
    row.replicate = rep;
    row.gen_kind = cell.generator.kind;
    row.p = cell.generator.p;
    row.r = cell.generator.r;
    row.alpha = cell.generator.alpha;
    row.noise_kind = cell.noise.kind;
    row.sigma = cell.noise.sigma;
    row.intensity = cell.noise.intensity;
    row.total_count = cell.noise.total_count;
    try {
        const std::uint64_t base = mix(seed, cell_idx, rep);
        GeneratorSpec gen = cell.generator;
        gen.seed = mix(base, 1);
        Tensor3 truth = generate_tensor(gen);
        CrossIndices idx =
            cell.sampling.use_rho
                ? rho_policy_indices(gen.p, cell.sampling.rho, mix(base, 2))
                : random_cross_indices(gen.p, cell.sampling.m, cell.sampling.g, mix(base, 2));
        row.m = idx.m();
        row.g = idx.g();
        NoiseSpec noise = cell.noise;
        noise.seed = mix(base, 3);
        CrossObservations obs = apply_noise(truth, idx, noise);

        NoisyConfig cfg;
        cfg.lambda = cell.lambda.resolve(gen.p, idx.m());
        cfg.singularity_rel_tol = cell.singularity_rel_tol;
        cfg.pinv_rel_tol = cell.pinv_rel_tol;
        row.lambda = cfg.lambda;

        const auto t0 = std::chrono::steady_clock::now();
        CompletionReport report = complete_noisy(obs, cfg);
        const auto t1 = std::chrono::steady_clock::now();
        if (opts.record_timing)
            row.wall_time_seconds = std::chrono::duration<double>(t1 - t0).count();

        // Count models observe raw counts; bring the estimate back to the
        // scale of the probability/intensity tensor before scoring.
        Tensor3 estimate = std::move(report.estimate);
        if (noise.kind == NoiseKind::poisson)
            estimate = estimate.scaled(1.0 / noise.intensity);
        else if (noise.kind == NoiseKind::multinomial)
            estimate = estimate.scaled(1.0 / static_cast<double>(noise.total_count));

        row.r_hat = report.r_hat;
        row.relative_hs_loss = relative_hs_loss(estimate, truth);
        row.ok = true;
        row.status = "ok";
    } catch (const std::exception& e) {
        row.ok = false;
        row.status = std::string("error: ") + e.what();
    }
    return row;
}

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

// One row per (cell, replicate), in that order regardless of how many worker
// threads execute them; every replicate reseeds from (seed, cell, replicate)
// so single rows can be reproduced in isolation.
inline std::vector<ExperimentRow> run_experiment(const std::vector<ExperimentCell>& cells,
                                                 int replicates, std::uint64_t seed,
                                                 const RunOptions& opts = {}) {
    if (replicates < 1) throw std::invalid_argument("run_experiment: replicates must be >= 1");
    const std::size_t total = cells.size() * static_cast<std::size_t>(replicates);
    std::vector<ExperimentRow> rows(total);
    const int jobs = std::max(1, opts.jobs);
    if (jobs == 1 || total <= 1) {
        for (std::size_t c = 0; c < cells.size(); ++c)
            for (std::size_t rep = 0; rep < static_cast<std::size_t>(replicates); ++rep)
                rows[c * static_cast<std::size_t>(replicates) + rep] =
                    detail::run_replicate(cells[c], c, rep, seed, opts);
        return rows;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t task = next.fetch_add(1);
            if (task >= total) return;
            const std::size_t c = task / static_cast<std::size_t>(replicates);
            const std::size_t rep = task % static_cast<std::size_t>(replicates);
            rows[task] = detail::run_replicate(cells[c], c, rep, seed, opts);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(jobs));
    for (int i = 0; i < jobs; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    return rows;
}

inline const char* experiment_csv_header() {
    return "cell,replicate,generator,p1,p2,p3,r1,r2,r3,alpha,m1,m2,m3,g1,g2,g3,"
           "noise,sigma,intensity,total_count,lambda1,lambda2,lambda3,"
           "r_hat1,r_hat2,r_hat3,relative_hs_loss,wall_time_seconds,status";
}

// Fixed column order as in experiment_csv_header(); floats carry 17
// significant digits so values round-trip, noise parameters that do not apply
// to the row's model are left empty, and so is the loss of a failed row.
inline void write_csv(const std::vector<ExperimentRow>& rows, std::ostream& out) {
    out << experiment_csv_header() << "\n";
    for (const auto& row : rows) {
        out << row.cell << ',' << row.replicate << ',' << generator_kind_name(row.gen_kind);
        for (int t = 0; t < 3; ++t) out << ',' << row.p[static_cast<std::size_t>(t)];
        for (int t = 0; t < 3; ++t) out << ',' << row.r[static_cast<std::size_t>(t)];
        out << ',' << detail::fmt_double(row.alpha);
        for (int t = 0; t < 3; ++t) out << ',' << row.m[static_cast<std::size_t>(t)];
        for (int t = 0; t < 3; ++t) out << ',' << row.g[static_cast<std::size_t>(t)];
        out << ',' << noise_kind_name(row.noise_kind);
        out << ',';
        if (row.noise_kind == NoiseKind::gaussian) out << detail::fmt_double(row.sigma);
        out << ',';
        if (row.noise_kind == NoiseKind::poisson) out << detail::fmt_double(row.intensity);
        out << ',';
        if (row.noise_kind == NoiseKind::multinomial) out << row.total_count;
        for (int t = 0; t < 3; ++t)
            out << ',' << detail::fmt_double(row.lambda[static_cast<std::size_t>(t)]);
        for (int t = 0; t < 3; ++t) out << ',' << row.r_hat[static_cast<std::size_t>(t)];
        out << ',';
        if (row.ok) out << detail::fmt_double(row.relative_hs_loss);
        out << ',' << detail::fmt_double(row.wall_time_seconds);
        out << ',' << row.status << "\n";
    }
}

}  // namespace cross
