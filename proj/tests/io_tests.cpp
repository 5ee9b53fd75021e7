#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "cross/io.hpp"
#include "oracles.hpp"

using namespace cross;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("crosstc_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

}  // namespace

TEST_CASE("xt3 round-trips tensors bit-exactly") {
    TempDir tmp;
    Tensor3 x = oracles::random_tensor({7, 5, 6}, 3);
    const fs::path p = tmp.path / "x.xt3";
    write_xt3(x, p);
    Tensor3 y = read_xt3(p);
    CHECK(y.dims() == x.dims());
    CHECK((y.as_vector() - x.as_vector()).cwiseAbs().maxCoeff() == 0.0);

    // Header layout: magic, three little-endian u64 dims.
    std::ifstream in(p, std::ios::binary);
    unsigned char head[28];
    in.read(reinterpret_cast<char*>(head), 28);
    CHECK(head[0] == 0x58);
    CHECK(head[1] == 0x54);
    CHECK(head[2] == 0x33);
    CHECK(head[3] == 0x00);
    CHECK(head[4] == 7);
    CHECK(head[12] == 5);
    CHECK(head[20] == 6);
}

TEST_CASE("xt3 rejects corrupt files") {
    TempDir tmp;
    const fs::path p = tmp.path / "bad.xt3";
    {
        std::ofstream out(p, std::ios::binary);
        out << "not a tensor";
    }
    CHECK_THROWS_AS(read_xt3(p), std::runtime_error);
    Tensor3 x(2, 2, 2);
    write_xt3(x, p);
    fs::resize_file(p, 40);  // truncate the payload
    CHECK_THROWS_AS(read_xt3(p), std::runtime_error);
    CHECK_THROWS_AS(read_xt3(tmp.path / "missing.xt3"), std::runtime_error);
}

TEST_CASE("indices JSON round-trips and uses 1-based entries") {
    TempDir tmp;
    CrossIndices idx = random_cross_indices({9, 8, 7}, {4, 3, 3}, {5, 6, 4}, 17);
    const fs::path p = tmp.path / "idx.json";
    write_indices(idx, p, 17);
    CrossIndices back = read_indices(p);
    CHECK(back.dims == idx.dims);
    CHECK(back.omega == idx.omega);
    CHECK(back.xi == idx.xi);

    std::ifstream in(p);
    nlohmann::json j;
    in >> j;
    CHECK(j.at("seed") == 17);
    CHECK(j.at("xi_orientation") == nlohmann::json({"jk", "ki", "ij"}));
    // 1-based: every serialized omega index is >= 1.
    for (const auto& om : j.at("omega"))
        for (const auto& v : om) CHECK(v.get<int>() >= 1);

    // Unsorted input is canonicalized on load.
    std::swap(j.at("omega").at(0).at(0), j.at("omega").at(0).at(1));
    CrossIndices sorted = indices_from_json(j);
    CHECK(sorted.omega == idx.omega);

    j["omega"][0][0] = 99;  // out of range after -1 shift
    CHECK_THROWS(indices_from_json(j));
}

TEST_CASE("observation bundles round-trip") {
    TempDir tmp;
    Tensor3 x = oracles::random_tensor({10, 9, 11}, 23);
    CrossIndices idx = random_cross_indices(x.dims(), {4, 4, 4}, {6, 6, 6}, 24);
    NoiseSpec noise;
    noise.kind = NoiseKind::gaussian;
    noise.sigma = 0.2;
    noise.seed = 25;
    CrossObservations obs = apply_noise(x, idx, noise);
    const fs::path p = tmp.path / "obs.cobs";
    write_observations(obs, p);
    CrossObservations back = read_observations(p);
    CHECK(back.indices.omega == obs.indices.omega);
    CHECK(back.indices.xi == obs.indices.xi);
    CHECK((back.body.as_vector() - obs.body.as_vector()).cwiseAbs().maxCoeff() == 0.0);
    for (int t = 0; t < 3; ++t) {
        CHECK((back.arm[static_cast<std::size_t>(t)] - obs.arm[static_cast<std::size_t>(t)])
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
        CHECK((back.joint[static_cast<std::size_t>(t)] - obs.joint[static_cast<std::size_t>(t)])
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
    }
    CHECK_NOTHROW(validate(back));
}

TEST_CASE("observation files reject tampering") {
    TempDir tmp;
    Tensor3 x = oracles::random_tensor({6, 6, 6}, 33);
    CrossIndices idx = random_cross_indices(x.dims(), {3, 3, 3}, {4, 4, 4}, 34);
    const fs::path p = tmp.path / "obs.cobs";
    write_observations(extract_observations(x, idx), p);
    {
        std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("ZZZZ", 4);
    }
    CHECK_THROWS_AS(read_observations(p), std::runtime_error);
}

TEST_CASE("report JSON carries ranks, lambdas and diagnostics") {
    CompletionReport rep;
    rep.estimate = Tensor3(2, 2, 2);
    rep.r_hat = {3, 2, 1};
    rep.lambda_used = {6.7, 6.7, 6.7};
    rep.degenerate = false;
    rep.diagnostics[0] = {0.5, 3.2, 4};
    nlohmann::json j = report_to_json(rep, "noisy", "est.xt3", 1.25e-3);
    CHECK(j.at("r_hat") == nlohmann::json({3, 2, 1}));
    CHECK(j.at("algorithm") == "noisy");
    CHECK(j.at("estimate_path") == "est.xt3");
    CHECK(j.at("relative_hs_loss").get<double>() == doctest::Approx(1.25e-3));
    CHECK(j.at("diagnostics").at(0).at("trimming_steps") == 4);
    nlohmann::json none = report_to_json(rep, "noisy", "est.xt3");
    CHECK(none.at("relative_hs_loss").is_null());
}

TEST_CASE("grid config parsing") {
    nlohmann::json j = nlohmann::json::parse(R"({
      "cells": [
        {"generator": {"kind": "gaussian_lowrank", "p": [50,50,50], "r": [3,3,3]},
         "sampling": {"m": [10,10,10], "g": [10,10,10]},
         "noise": {"kind": "gaussian", "sigma": 0.3},
         "lambda": {"multiplier": 2.5}},
        {"generator": {"kind": "approx_lowrank", "p": [20,20,20], "alpha": 2.0},
         "sampling": {"rho": 0.3},
         "noise": {"kind": "poisson", "H": 1e5}}
      ]})");
    auto cells = parse_grid_config(j);
    REQUIRE(cells.size() == 2);
    CHECK(cells[0].generator.kind == GeneratorKind::gaussian_lowrank);
    CHECK(cells[0].lambda.multiplier == doctest::Approx(2.5));
    CHECK(cells[0].noise.sigma == doctest::Approx(0.3));
    CHECK(cells[1].sampling.use_rho);
    CHECK(cells[1].generator.alpha == doctest::Approx(2.0));
    CHECK(cells[1].noise.intensity == doctest::Approx(1e5));

    nlohmann::json bad = nlohmann::json::parse(R"({"cells": [{"generator": {"kind": "nope"}}]})");
    CHECK_THROWS_WITH_AS(static_cast<void>(parse_grid_config(bad)), doctest::Contains("cell 0"),
                         std::runtime_error);
}
