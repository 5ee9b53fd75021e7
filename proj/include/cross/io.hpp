#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <limits>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cross/completion.hpp"
#include "cross/experiment.hpp"
#include "cross/scheme.hpp"
#include "cross/tensor.hpp"

// File formats.
//
// XT3 (binary tensor): magic bytes 0x58 0x54 0x33 0x00, three unsigned 64-bit
// little-endian dims, then p1*p2*p3 IEEE-754 little-endian doubles in storage
// order (first index fastest).
//
// Cross indices (JSON): {"dims", "omega", "xi", "xi_orientation", "seed"?}.
// Indices in the JSON are 1-based, matching the written convention; this is
// the single boundary where the 0-based in-memory form is converted.
//
// Observations (.cobs): magic 0x58 0x4f 0x42 0x00, an unsigned 64-bit
// little-endian header length, a JSON header carrying the indices and the
// length of every binary section, then the body block and the three arm
// matrices (column-major) as little-endian double arrays. Joints are rows of
// arms and are rebuilt on load.

namespace cross {

namespace io_detail {

static_assert(std::numeric_limits<double>::is_iec559, "IEEE-754 doubles required");

inline void put_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

inline void write_doubles_le(std::ofstream& out, const double* data, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(data),
                  static_cast<std::streamsize>(n * sizeof(double)));
    } else {
        std::string buf;
        buf.reserve(n * 8);
        for (std::size_t i = 0; i < n; ++i)
            put_u64_le(buf, std::bit_cast<std::uint64_t>(data[i]));
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
}

inline void read_doubles_le(std::ifstream& in, double* data, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
        in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
    } else {
        std::vector<unsigned char> buf(n * 8);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        for (std::size_t i = 0; i < n; ++i)
            data[i] = std::bit_cast<double>(get_u64_le(buf.data() + 8 * i));
    }
    if (!in) throw std::runtime_error("truncated double array in binary file");
}

constexpr std::array<unsigned char, 4> kXt3Magic{0x58, 0x54, 0x33, 0x00};
constexpr std::array<unsigned char, 4> kObsMagic{0x58, 0x4f, 0x42, 0x00};

// All writers go through a temp file plus rename so readers never see a
// half-written output.
template <typename WriteFn>
void atomic_write(const std::filesystem::path& path, WriteFn&& fn) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        fn(out);
        out.flush();
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace io_detail

inline void write_xt3(const Tensor3& x, const std::filesystem::path& path) {
    io_detail::atomic_write(path, [&](std::ofstream& out) {
        out.write(reinterpret_cast<const char*>(io_detail::kXt3Magic.data()), 4);
        std::string head;
        for (Index d : x.dims()) io_detail::put_u64_le(head, static_cast<std::uint64_t>(d));
        out.write(head.data(), static_cast<std::streamsize>(head.size()));
        io_detail::write_doubles_le(out, x.data(), static_cast<std::size_t>(x.size()));
    });
}

inline Tensor3 read_xt3(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::array<unsigned char, 4> magic{};
    in.read(reinterpret_cast<char*>(magic.data()), 4);
    if (!in || magic != io_detail::kXt3Magic)
        throw std::runtime_error(path.string() + " is not an XT3 tensor file (bad magic)");
    std::array<unsigned char, 24> dim_bytes{};
    in.read(reinterpret_cast<char*>(dim_bytes.data()), 24);
    if (!in) throw std::runtime_error(path.string() + ": truncated XT3 header");
    Dims3 dims;
    for (int t = 0; t < 3; ++t) {
        const std::uint64_t d = io_detail::get_u64_le(dim_bytes.data() + 8 * t);
        if (d == 0 || d > (1ULL << 32))
            throw std::runtime_error(path.string() + ": implausible XT3 dimension " +
                                     std::to_string(d));
        dims[static_cast<std::size_t>(t)] = static_cast<Index>(d);
    }
    Tensor3 x(dims);
    io_detail::read_doubles_le(in, x.data(), static_cast<std::size_t>(x.size()));
    if (!x.as_vector().allFinite())
        throw std::runtime_error(path.string() + ": tensor contains non-finite values");
    return x;
}

inline nlohmann::json indices_to_json(const CrossIndices& idx,
                                      std::optional<std::uint64_t> seed = std::nullopt) {
    nlohmann::json j;
    j["dims"] = {idx.dims[0], idx.dims[1], idx.dims[2]};
    for (int t = 0; t < 3; ++t) {
        nlohmann::json om = nlohmann::json::array();
        for (Index v : idx.omega[static_cast<std::size_t>(t)]) om.push_back(v + 1);
        j["omega"][static_cast<std::size_t>(t)] = std::move(om);
        nlohmann::json xs = nlohmann::json::array();
        for (const auto& pr : idx.xi[static_cast<std::size_t>(t)])
            xs.push_back({pr[0] + 1, pr[1] + 1});
        j["xi"][static_cast<std::size_t>(t)] = std::move(xs);
    }
    j["xi_orientation"] = {"jk", "ki", "ij"};
    if (seed) j["seed"] = *seed;
    return j;
}

inline CrossIndices indices_from_json(const nlohmann::json& j) {
    CrossIndices idx;
    try {
        const auto& dims = j.at("dims");
        if (!dims.is_array() || dims.size() != 3)
            throw std::runtime_error("\"dims\" must be an array of three integers");
        for (int t = 0; t < 3; ++t)
            idx.dims[static_cast<std::size_t>(t)] = dims.at(static_cast<std::size_t>(t)).get<Index>();
        const auto& omega = j.at("omega");
        const auto& xi = j.at("xi");
        if (!omega.is_array() || omega.size() != 3 || !xi.is_array() || xi.size() != 3)
            throw std::runtime_error("\"omega\" and \"xi\" must each hold three lists");
        for (int t = 0; t < 3; ++t) {
            for (const auto& v : omega.at(static_cast<std::size_t>(t)))
                idx.omega[static_cast<std::size_t>(t)].push_back(v.get<Index>() - 1);
            for (const auto& pr : xi.at(static_cast<std::size_t>(t))) {
                if (!pr.is_array() || pr.size() != 2)
                    throw std::runtime_error("xi entries must be two-element pairs");
                idx.xi[static_cast<std::size_t>(t)].push_back(
                    {pr.at(0).get<Index>() - 1, pr.at(1).get<Index>() - 1});
            }
            std::sort(idx.omega[static_cast<std::size_t>(t)].begin(),
                      idx.omega[static_cast<std::size_t>(t)].end());
            std::sort(idx.xi[static_cast<std::size_t>(t)].begin(),
                      idx.xi[static_cast<std::size_t>(t)].end());
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("malformed cross-indices JSON: ") + e.what());
    }
    validate(idx);
    return idx;
}

inline void write_indices(const CrossIndices& idx, const std::filesystem::path& path,
                          std::optional<std::uint64_t> seed = std::nullopt) {
    io_detail::atomic_write(path, [&](std::ofstream& out) {
        out << indices_to_json(idx, seed).dump(2) << "\n";
    });
}

inline CrossIndices read_indices(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path.string() + ": invalid JSON: " + e.what());
    }
    return indices_from_json(j);
}

inline void write_observations(const CrossObservations& obs, const std::filesystem::path& path) {
    validate(obs);
    nlohmann::json header;
    header["indices"] = indices_to_json(obs.indices);
    auto m = obs.indices.m();
    header["body"] = {{"dims", {m[0], m[1], m[2]}}, {"doubles", obs.body.size()}};
    header["arms"] = nlohmann::json::array();
    for (int t = 0; t < 3; ++t)
        header["arms"].push_back({{"rows", obs.arm[static_cast<std::size_t>(t)].rows()},
                                  {"cols", obs.arm[static_cast<std::size_t>(t)].cols()},
                                  {"doubles", obs.arm[static_cast<std::size_t>(t)].size()}});
    const std::string head = header.dump();
    io_detail::atomic_write(path, [&](std::ofstream& out) {
        out.write(reinterpret_cast<const char*>(io_detail::kObsMagic.data()), 4);
        std::string len;
        io_detail::put_u64_le(len, head.size());
        out.write(len.data(), 8);
        out.write(head.data(), static_cast<std::streamsize>(head.size()));
        io_detail::write_doubles_le(out, obs.body.data(), static_cast<std::size_t>(obs.body.size()));
        for (int t = 0; t < 3; ++t)
            io_detail::write_doubles_le(out, obs.arm[static_cast<std::size_t>(t)].data(),
                                        static_cast<std::size_t>(
                                            obs.arm[static_cast<std::size_t>(t)].size()));
    });
}

inline CrossObservations read_observations(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::array<unsigned char, 4> magic{};
    in.read(reinterpret_cast<char*>(magic.data()), 4);
    if (!in || magic != io_detail::kObsMagic)
        throw std::runtime_error(path.string() + " is not a Cross observations file (bad magic)");
    std::array<unsigned char, 8> len_bytes{};
    in.read(reinterpret_cast<char*>(len_bytes.data()), 8);
    if (!in) throw std::runtime_error(path.string() + ": truncated header");
    const std::uint64_t head_len = io_detail::get_u64_le(len_bytes.data());
    if (head_len > (1ULL << 30))
        throw std::runtime_error(path.string() + ": implausible header length");
    std::string head(head_len, '\0');
    in.read(head.data(), static_cast<std::streamsize>(head_len));
    if (!in) throw std::runtime_error(path.string() + ": truncated header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(head);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path.string() + ": invalid header JSON: " + e.what());
    }

    CrossObservations obs;
    obs.indices = indices_from_json(header.at("indices"));
    auto m = obs.indices.m();
    auto g = obs.indices.g();
    try {
        const auto& body = header.at("body");
        if (body.at("dims") != nlohmann::json({m[0], m[1], m[2]}) ||
            body.at("doubles").get<Index>() != m[0] * m[1] * m[2])
            throw std::runtime_error("body section does not match the indices");
        for (int t = 0; t < 3; ++t) {
            const auto& arm = header.at("arms").at(static_cast<std::size_t>(t));
            if (arm.at("rows").get<Index>() != obs.indices.dims[static_cast<std::size_t>(t)] ||
                arm.at("cols").get<Index>() != g[static_cast<std::size_t>(t)])
                throw std::runtime_error("arm section does not match the indices");
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path.string() + ": malformed header: " + e.what());
    }

    obs.body = Tensor3(m[0], m[1], m[2]);
    io_detail::read_doubles_le(in, obs.body.data(), static_cast<std::size_t>(obs.body.size()));
    for (int t = 0; t < 3; ++t) {
        Matrix& arm = obs.arm[static_cast<std::size_t>(t)];
        arm.resize(obs.indices.dims[static_cast<std::size_t>(t)], g[static_cast<std::size_t>(t)]);
        io_detail::read_doubles_le(in, arm.data(), static_cast<std::size_t>(arm.size()));
        Matrix& joint = obs.joint[static_cast<std::size_t>(t)];
        joint.resize(m[static_cast<std::size_t>(t)], g[static_cast<std::size_t>(t)]);
        for (Index r = 0; r < joint.rows(); ++r)
            joint.row(r) =
                arm.row(obs.indices.omega[static_cast<std::size_t>(t)][static_cast<std::size_t>(r)]);
    }
    validate(obs);
    return obs;
}

inline nlohmann::json report_to_json(const CompletionReport& report,
                                     const std::string& algorithm,
                                     const std::string& estimate_path,
                                     std::optional<double> loss_vs_truth = std::nullopt) {
    nlohmann::json j;
    j["algorithm"] = algorithm;
    j["r_hat"] = {report.r_hat[0], report.r_hat[1], report.r_hat[2]};
    j["lambda_used"] = {report.lambda_used[0], report.lambda_used[1], report.lambda_used[2]};
    j["degenerate"] = report.degenerate;
    j["diagnostics"] = nlohmann::json::array();
    for (int t = 0; t < 3; ++t) {
        const auto& d = report.diagnostics[static_cast<std::size_t>(t)];
        j["diagnostics"].push_back({{"mode", t + 1},
                                    {"sigma_min_joint_leading", d.sigma_min_joint_leading},
                                    {"arm_joint_ratio", d.arm_joint_ratio},
                                    {"trimming_steps", d.trimming_steps}});
    }
    j["estimate_path"] = estimate_path;
    if (loss_vs_truth)
        j["relative_hs_loss"] = *loss_vs_truth;
    else
        j["relative_hs_loss"] = nullptr;
    return j;
}

inline GeneratorKind generator_kind_from_name(const std::string& name) {
    if (name == "gaussian_lowrank") return GeneratorKind::gaussian_lowrank;
    if (name == "approx_lowrank") return GeneratorKind::approx_lowrank;
    if (name == "nonneg_normalized") return GeneratorKind::nonneg_normalized;
    throw std::runtime_error("unknown generator kind \"" + name + "\"");
}

inline NoiseKind noise_kind_from_name(const std::string& name) {
    if (name == "none") return NoiseKind::none;
    if (name == "gaussian") return NoiseKind::gaussian;
    if (name == "poisson") return NoiseKind::poisson;
    if (name == "multinomial") return NoiseKind::multinomial;
    throw std::runtime_error("unknown noise kind \"" + name + "\"");
}

namespace io_detail {

template <typename T>
std::array<T, 3> triple_from_json(const nlohmann::json& j, const char* what) {
    if (!j.is_array() || j.size() != 3)
        throw std::runtime_error(std::string(what) + " must be an array of three values");
    return {j.at(0).get<T>(), j.at(1).get<T>(), j.at(2).get<T>()};
}

}  // namespace io_detail

// Declarative simulation grid:
// {"cells": [{"generator": {"kind", "p", "r", "alpha"?},
//             "sampling": {"m", "g"} or {"rho"},
//             "noise": {"kind", "sigma"? | "intensity"? | "total_count"?},
//             "lambda": {"multiplier"} or {"values"}      (optional, default x3)
//             "singularity_rel_tol"?, "pinv_rel_tol"?}, ...]}
inline std::vector<ExperimentCell> parse_grid_config(const nlohmann::json& j) {
    std::vector<ExperimentCell> cells;
    if (!j.contains("cells") || !j.at("cells").is_array() || j.at("cells").empty())
        throw std::runtime_error("grid config needs a non-empty \"cells\" array");
    for (std::size_t ci = 0; ci < j.at("cells").size(); ++ci) {
        const auto& cj = j.at("cells").at(ci);
        try {
            ExperimentCell cell;
            const auto& gen = cj.at("generator");
            cell.generator.kind = generator_kind_from_name(gen.at("kind").get<std::string>());
            cell.generator.p = io_detail::triple_from_json<Index>(gen.at("p"), "generator p");
            if (gen.contains("r"))
                cell.generator.r = io_detail::triple_from_json<Index>(gen.at("r"), "generator r");
            else if (cell.generator.kind != GeneratorKind::approx_lowrank)
                throw std::runtime_error("generator needs \"r\"");
            cell.generator.alpha = gen.value("alpha", 0.0);

            const auto& samp = cj.at("sampling");
            if (samp.contains("rho")) {
                cell.sampling.use_rho = true;
                cell.sampling.rho = samp.at("rho").get<double>();
            } else {
                cell.sampling.m = io_detail::triple_from_json<Index>(samp.at("m"), "sampling m");
                cell.sampling.g = io_detail::triple_from_json<Index>(samp.at("g"), "sampling g");
            }

            const auto& noise = cj.at("noise");
            cell.noise.kind = noise_kind_from_name(noise.at("kind").get<std::string>());
            cell.noise.sigma = noise.value("sigma", 0.0);
            cell.noise.intensity = noise.value("intensity", noise.value("H", 0.0));
            cell.noise.total_count =
                noise.value("total_count", static_cast<long long>(noise.value("N", 0LL)));

            if (cj.contains("lambda")) {
                const auto& lam = cj.at("lambda");
                if (lam.contains("values")) {
                    cell.lambda.use_values = true;
                    cell.lambda.values =
                        io_detail::triple_from_json<double>(lam.at("values"), "lambda values");
                } else {
                    cell.lambda.multiplier = lam.value("multiplier", 3.0);
                }
            }
            cell.singularity_rel_tol = cj.value("singularity_rel_tol", 1e-12);
            cell.pinv_rel_tol = cj.value("pinv_rel_tol", 1e-10);
            cells.push_back(std::move(cell));
        } catch (const std::exception& e) {
            throw std::runtime_error("grid config cell " + std::to_string(ci) + ": " + e.what());
        }
    }
    return cells;
}

inline std::vector<ExperimentCell> read_grid_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path.string() + ": invalid JSON: " + e.what());
    }
    return parse_grid_config(j);
}

}  // namespace cross
