#pragma once

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cross/cross.hpp"

namespace cross::cli {

namespace detail {

inline std::array<Index, 3> to_triple(const std::vector<Index>& v, const std::string& flag) {
    if (v.size() == 1) return {v[0], v[0], v[0]};
    if (v.size() == 3) return {v[0], v[1], v[2]};
    throw CLI::ValidationError(flag, "expects one value or three comma-separated values");
}

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct SampleArgs {
    std::string input;
    std::vector<Index> m, g;
    double rho = 0.0;
    bool use_rho = false;
    std::uint64_t seed = 0;
    std::string out_indices, out_obs;
};

inline int cmd_sample(const SampleArgs& a, std::ostream& out) {
    Tensor3 x = read_xt3(a.input);
    CrossIndices idx;
    if (a.use_rho) {
        idx = rho_policy_indices(x.dims(), a.rho, a.seed);
    } else {
        auto m = to_triple(a.m, "--m");
        std::array<Index, 3> g;
        if (!a.g.empty()) {
            g = to_triple(a.g, "--g");
        } else {
            g = rho_policy_g(x.dims(), m);  // round(m1*m2*m3 / p_t), clamped
        }
        idx = random_cross_indices(x.dims(), m, g, a.seed);
    }
    CrossObservations obs = extract_observations(x, idx);
    if (!a.out_indices.empty()) write_indices(idx, a.out_indices, a.seed);
    if (!a.out_obs.empty()) write_observations(obs, a.out_obs);
    auto m = idx.m();
    auto g = idx.g();
    out << "dims: " << x.dims()[0] << "x" << x.dims()[1] << "x" << x.dims()[2] << "\n"
        << "m: " << m[0] << "," << m[1] << "," << m[2] << "  g: " << g[0] << "," << g[1] << ","
        << g[2] << "\n"
        << "measurements: " << measurement_count(idx) << "\n"
        << "sampling ratio: " << fmt(sampling_ratio(idx)) << "\n";
    return 0;
}

struct CompleteArgs {
    std::string obs_path;
    bool noiseless = false;
    bool lambda_default = false;
    std::vector<double> lambda;
    double pinv_rel_tol = 0.0;
    double singularity_rel_tol = 1e-12;
    std::string out_tensor, out_report, truth_path;
};

inline int cmd_complete(const CompleteArgs& a, std::ostream& out) {
    CrossObservations obs = read_observations(a.obs_path);
    std::optional<Tensor3> truth;
    if (!a.truth_path.empty()) truth = read_xt3(a.truth_path);

    CompletionReport report;
    std::string algorithm;
    if (a.noiseless) {
        algorithm = "noiseless";
        report.estimate = complete_noiseless(obs, a.pinv_rel_tol);
        for (int t = 0; t < 3; ++t)
            report.r_hat[static_cast<std::size_t>(t)] =
                numerical_rank(obs.joint[static_cast<std::size_t>(t)], a.pinv_rel_tol);
        report.lambda_used = {0.0, 0.0, 0.0};
    } else {
        algorithm = "noisy";
        NoisyConfig cfg;
        if (a.lambda_default || a.lambda.empty()) {
            cfg.lambda = default_lambda(obs.indices.dims, obs.indices.m());
        } else {
            auto lam = a.lambda;
            if (lam.size() == 1) lam = {lam[0], lam[0], lam[0]};
            if (lam.size() != 3)
                throw CLI::ValidationError("--lambda", "expects one or three values");
            cfg.lambda = {lam[0], lam[1], lam[2]};
        }
        if (a.pinv_rel_tol > 0.0) cfg.pinv_rel_tol = a.pinv_rel_tol;
        cfg.singularity_rel_tol = a.singularity_rel_tol;
        report = complete_noisy(obs, cfg);
    }

    std::optional<double> loss;
    if (truth) loss = relative_hs_loss(report.estimate, *truth);
    if (!a.out_tensor.empty()) write_xt3(report.estimate, a.out_tensor);
    if (!a.out_report.empty()) {
        nlohmann::json j = report_to_json(report, algorithm, a.out_tensor, loss);
        io_detail::atomic_write(a.out_report,
                                [&](std::ofstream& f) { f << j.dump(2) << "\n"; });
    }
    out << "algorithm: " << algorithm << "\n"
        << "r_hat: " << report.r_hat[0] << "," << report.r_hat[1] << "," << report.r_hat[2]
        << "\n";
    if (report.degenerate)
        out << "warning: a mode trimmed to rank zero; the estimate is the zero tensor\n";
    if (loss) out << "relative loss vs truth: " << fmt(*loss) << "\n";
    return 0;
}

struct HosvdArgs {
    std::string input;
    std::vector<Index> ranks;
    std::string out_tensor, out_spectra;
};

inline int cmd_hosvd(const HosvdArgs& a, std::ostream& out) {
    Tensor3 y = read_xt3(a.input);
    auto ranks = to_triple(a.ranks, "--ranks");
    HosvdResult h = hosvd_with_spectra(y, ranks);
    Tensor3 recon = h.factors.reconstruct();
    if (!a.out_tensor.empty()) write_xt3(recon, a.out_tensor);
    if (!a.out_spectra.empty()) {
        io_detail::atomic_write(a.out_spectra, [&](std::ofstream& f) {
            f << "mode,index,singular_value\n";
            for (int t = 0; t < 3; ++t)
                for (Index i = 0; i < h.spectra[static_cast<std::size_t>(t)].size(); ++i)
                    f << (t + 1) << ',' << (i + 1) << ','
                      << fmt(h.spectra[static_cast<std::size_t>(t)](i)) << "\n";
        });
    }
    out << "ranks: " << ranks[0] << "," << ranks[1] << "," << ranks[2] << "\n"
        << "relative reconstruction error: " << fmt(relative_hs_loss(recon, y)) << "\n";
    return 0;
}

struct SimulateArgs {
    std::string grid_path;
    int replicates = 100;
    std::uint64_t seed = 0;
    std::string out_csv;
    int jobs = 1;
    bool timing = false;
};

inline int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
    auto cells = read_grid_config(a.grid_path);
    RunOptions opts;
    opts.jobs = a.jobs;
    opts.record_timing = a.timing;
    auto rows = run_experiment(cells, a.replicates, a.seed, opts);
    io_detail::atomic_write(a.out_csv, [&](std::ofstream& f) { write_csv(rows, f); });
    std::size_t failed = 0;
    for (const auto& row : rows)
        if (!row.ok) ++failed;
    out << "cells: " << cells.size() << "  replicates: " << a.replicates
        << "  rows: " << rows.size() << "  failed: " << failed << "\n";
    return failed == 0 ? 0 : 3;
}

struct CompareArgs {
    std::string obs_path, full_path, out_csv;
    std::vector<double> lambda;
};

// Completion from Cross measurements versus rank-matched HOSVD of the full
// tensor: the error ratio ||Xhat - Y|| / ||Xtilde - Y|| and per-mode subspace
// alignments. When both estimators reproduce Y to machine precision the
// ratio is reported as exactly 1 (they coincide).
inline int cmd_compare(const CompareArgs& a, std::ostream& out) {
    CrossObservations obs = read_observations(a.obs_path);
    Tensor3 y = read_xt3(a.full_path);
    if (y.dims() != obs.indices.dims)
        throw std::runtime_error("compare: full tensor dims do not match the observations");

    NoisyConfig cfg;
    if (!a.lambda.empty()) {
        auto lam = a.lambda;
        if (lam.size() == 1) lam = {lam[0], lam[0], lam[0]};
        if (lam.size() != 3) throw CLI::ValidationError("--lambda", "expects one or three values");
        cfg.lambda = {lam[0], lam[1], lam[2]};
    } else {
        cfg.lambda = default_lambda(obs.indices.dims, obs.indices.m());
    }
    CompletionReport rep = complete_noisy(obs, cfg);
    if (rep.degenerate) {
        out << "error: a mode trimmed to rank zero; draw a denser cross (larger m/g)\n";
        return 4;
    }

    HosvdResult h = hosvd_with_spectra(y, rep.r_hat);
    Tensor3 xtilde = h.factors.reconstruct();

    const double ynorm = hs_norm(y);
    auto hs_err = [&](const Tensor3& est) {
        double acc = 0.0;
        for (Index i = 0; i < y.size(); ++i) {
            const double d = est.data()[i] - y.data()[i];
            acc += d * d;
        }
        return std::sqrt(acc);
    };
    const double err_hat = hs_err(rep.estimate);
    const double err_tilde = hs_err(xtilde);
    double ratio;
    if (err_hat < 1e-12 * ynorm && err_tilde < 1e-12 * ynorm)
        ratio = 1.0;
    else
        ratio = err_hat / err_tilde;

    std::array<double, 3> align;
    for (int t = 0; t < 3; ++t) {
        SvdResult f = svd(matricize(rep.estimate, t + 1));
        Matrix u_hat = f.u.leftCols(rep.r_hat[static_cast<std::size_t>(t)]);
        align[static_cast<std::size_t>(t)] =
            subspace_alignment(u_hat, h.factors.u[static_cast<std::size_t>(t)]);
    }

    if (!a.out_csv.empty()) {
        io_detail::atomic_write(a.out_csv, [&](std::ofstream& f) {
            f << "sampling_ratio,error_ratio,alignment1,alignment2,alignment3,"
                 "r_hat1,r_hat2,r_hat3\n";
            f << fmt(sampling_ratio(obs.indices)) << ',' << fmt(ratio) << ',' << fmt(align[0])
              << ',' << fmt(align[1]) << ',' << fmt(align[2]) << ',' << rep.r_hat[0] << ','
              << rep.r_hat[1] << ',' << rep.r_hat[2] << "\n";
        });
    }
    out << "sampling ratio: " << fmt(sampling_ratio(obs.indices)) << "\n"
        << "r_hat: " << rep.r_hat[0] << "," << rep.r_hat[1] << "," << rep.r_hat[2] << "\n"
        << "error ratio |Xhat-Y|/|Xtilde-Y|: " << fmt(ratio) << "\n"
        << "subspace alignments: " << fmt(align[0]) << ", " << fmt(align[1]) << ", "
        << fmt(align[2]) << "\n";
    return 0;
}

inline int cmd_info(const std::string& path, std::ostream& out) {
    namespace fs = std::filesystem;
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw std::runtime_error("cannot open " + path);
    char magic[4] = {0, 0, 0, 0};
    probe.read(magic, 4);
    probe.close();
    if (magic[0] == 'X' && magic[1] == 'T' && magic[2] == '3') {
        Tensor3 x = read_xt3(path);
        out << "XT3 tensor " << x.dims()[0] << "x" << x.dims()[1] << "x" << x.dims()[2]
            << "  entries: " << x.size() << "  hs_norm: " << fmt(hs_norm(x)) << "\n";
        return 0;
    }
    if (magic[0] == 'X' && magic[1] == 'O' && magic[2] == 'B') {
        CrossObservations obs = read_observations(path);
        auto m = obs.indices.m();
        auto g = obs.indices.g();
        out << "Cross observations on " << obs.indices.dims[0] << "x" << obs.indices.dims[1]
            << "x" << obs.indices.dims[2] << "\n"
            << "m: " << m[0] << "," << m[1] << "," << m[2] << "  g: " << g[0] << "," << g[1]
            << "," << g[2] << "\n"
            << "measurements: " << measurement_count(obs.indices)
            << "  sampling ratio: " << fmt(sampling_ratio(obs.indices)) << "\n";
        return 0;
    }
    CrossIndices idx = read_indices(path);  // JSON indices, or throws
    auto m = idx.m();
    auto g = idx.g();
    out << "Cross indices on " << idx.dims[0] << "x" << idx.dims[1] << "x" << idx.dims[2] << "\n"
        << "m: " << m[0] << "," << m[1] << "," << m[2] << "  g: " << g[0] << "," << g[1] << ","
        << g[2] << "\n"
        << "measurements: " << measurement_count(idx)
        << "  sampling ratio: " << fmt(sampling_ratio(idx)) << "\n";
    return 0;
}

}  // namespace detail

// Command-line front end. Returns the process exit code; all output goes to
// the given streams so tests can run it in-process.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
    CLI::App app{"Cross tensor measurement and completion toolkit"};
    app.require_subcommand(1);

    detail::SampleArgs sa;
    auto* sample = app.add_subcommand(
        "sample", "Draw a Cross measurement pattern from a tensor and extract observations");
    sample->add_option("--input", sa.input, "input XT3 tensor")->required();
    auto* opt_m = sample->add_option("--m", sa.m, "body sizes m1,m2,m3 (or one shared value)")
                      ->delimiter(',');
    sample->add_option("--g", sa.g,
                       "arm counts g1,g2,g3; default round(m1*m2*m3/p_t) when --m is given")
        ->delimiter(',');
    auto* opt_rho =
        sample->add_option("--rho", sa.rho,
                           "sizing rule m_t = round(rho*p_t), g_t = round(m1*m2*m3/p_t)");
    sample->add_option("--seed", sa.seed, "RNG seed")->default_val(0);
    sample->add_option("--out-indices", sa.out_indices, "output indices JSON path");
    sample->add_option("--out-obs", sa.out_obs, "output observations bundle path");
    opt_rho->excludes(opt_m);

    detail::CompleteArgs ca;
    auto* complete =
        app.add_subcommand("complete", "Recover a tensor from Cross observations");
    complete->add_option("--obs", ca.obs_path, "observations bundle")->required();
    auto* fl_noiseless = complete->add_flag("--noiseless", ca.noiseless,
                                            "exact completion for noiseless data");
    auto* fl_lambda =
        complete->add_option("--lambda", ca.lambda, "thresholds l1,l2,l3 (or one shared value)")
            ->delimiter(',');
    auto* fl_default = complete->add_flag("--lambda-default", ca.lambda_default,
                                          "use lambda_t = 3*sqrt(p_t/m_t)");
    complete->add_option("--pinv-rel-tol", ca.pinv_rel_tol,
                         "pseudo-inverse cutoff; 0 selects 1e-12*max(rows,cols)");
    complete->add_option("--singularity-rel-tol", ca.singularity_rel_tol,
                         "reciprocal-condition floor in the trimming test")
        ->default_val(1e-12);
    complete->add_option("--out", ca.out_tensor, "output XT3 estimate path");
    complete->add_option("--report", ca.out_report, "output JSON report path");
    complete->add_option("--truth", ca.truth_path,
                         "ground-truth XT3 for loss reporting (loss omitted when absent)");
    fl_noiseless->excludes(fl_lambda);
    fl_noiseless->excludes(fl_default);
    fl_default->excludes(fl_lambda);

    detail::HosvdArgs ha;
    auto* hos = app.add_subcommand("hosvd",
                                   "Rank-truncated projection onto leading mode subspaces");
    hos->add_option("--input", ha.input, "input XT3 tensor")->required();
    hos->add_option("--ranks", ha.ranks, "target ranks r1,r2,r3 (or one shared value)")
        ->required()
        ->delimiter(',');
    hos->add_option("--out", ha.out_tensor, "output XT3 reconstruction path");
    hos->add_option("--spectra", ha.out_spectra,
                    "CSV of singular values of every matricization");

    detail::SimulateArgs ma;
    auto* sim = app.add_subcommand("simulate", "Run a declarative experiment grid to CSV");
    sim->add_option("--grid", ma.grid_path, "grid config JSON")->required();
    sim->add_option("--replicates", ma.replicates, "replicates per cell")->default_val(100);
    sim->add_option("--seed", ma.seed, "master seed")->default_val(0);
    sim->add_option("--out", ma.out_csv, "output CSV path")->required();
    sim->add_option("--jobs", ma.jobs, "worker threads")->default_val(1);
    sim->add_flag("--timing", ma.timing,
                  "record wall times (off keeps output byte-identical across runs)");

    detail::CompareArgs pa;
    auto* cmp = app.add_subcommand(
        "compare", "Compare Cross completion against rank-matched HOSVD of the full tensor");
    cmp->add_option("--obs", pa.obs_path, "observations bundle")->required();
    cmp->add_option("--full", pa.full_path, "full XT3 tensor")->required();
    cmp->add_option("--out", pa.out_csv, "output CSV path");
    cmp->add_option("--lambda", pa.lambda, "thresholds; default 3*sqrt(p_t/m_t)")
        ->delimiter(',');

    std::string info_path;
    auto* info = app.add_subcommand("info", "Describe an XT3, indices JSON or observations file");
    info->add_option("path", info_path, "file to describe")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        std::stringstream out_msg;
        int code = app.exit(e, out_msg, out_msg);
        (code == 0 ? out : err) << out_msg.str();
        return code;
    }

    try {
        if (sample->parsed()) {
            sa.use_rho = opt_rho->count() > 0;
            if (!sa.use_rho && sa.m.empty())
                throw CLI::ValidationError("sample", "either --m or --rho is required");
            return detail::cmd_sample(sa, out);
        }
        if (complete->parsed()) return detail::cmd_complete(ca, out);
        if (hos->parsed()) return detail::cmd_hosvd(ha, out);
        if (sim->parsed()) return detail::cmd_simulate(ma, out);
        if (cmp->parsed()) return detail::cmd_compare(pa, out);
        if (info->parsed()) return detail::cmd_info(info_path, out);
    } catch (const CLI::ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

inline int run(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args);
}

}  // namespace cross::cli
