#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "probellm.h"

namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("probe_capi_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write_config(const fs::path& dir) {
    nlohmann::json cfg{
        {"benchmark", "capi-test"},
        {"output_dir", (dir / "out").string()},
        {"synthetic", true},
        {"seeds", {{"synthetic_count", 6}}},
        {"search",
         {{"max_simulations", 30}, {"failure_budget", 25}, {"rng_seed", 11}}},
        {"clustering", {{"min_cluster_size", 3}, {"min_samples", 1}}},
        {"synthetic_field",
         {{"dimension", 3},
          {"p_background", 0.05},
          {"rng_seed", 0},
          {"modes",
           {{{"center", {0.2, 0.2, 0.2}}, {"radius", 0.15}, {"p_inside", 0.9}},
            {{"center", {0.8, 0.8, 0.8}}, {"radius", 0.15}, {"p_inside", 0.9}}}}}}};
    fs::path p = dir / "config.json";
    std::ofstream(p) << cfg.dump(2);
    return p;
}

}  // namespace

TEST_CASE("create reports missing config through last_error") {
    pl_engine* e = pl_engine_create("/nonexistent/config.json");
    REQUIRE(e != nullptr);
    CHECK(std::string(pl_last_error(e)).size() > 0);
    CHECK(pl_engine_validate(e) == PL_ERR_VALIDATION);
    pl_engine_free(e);
}

TEST_CASE("validate and probe via the C API") {
    auto dir = fresh_dir("probe");
    auto cfg = write_config(dir);
    pl_engine* e = pl_engine_create(cfg.string().c_str());
    REQUIRE(e != nullptr);
    CHECK(std::string(pl_last_error(e)).empty());
    CHECK(pl_engine_validate(e) == PL_OK);
    CHECK(pl_engine_probe(e) == PL_OK);
    CHECK(fs::exists(dir / "out" / "report.json"));
    CHECK(pl_engine_mine(e) == PL_OK);
    CHECK(pl_engine_sweep(e) == PL_OK);
    CHECK(pl_engine_analyze(e, nullptr) == PL_OK);
    pl_engine_free(e);
}

TEST_CASE("overrides change behavior") {
    auto dir = fresh_dir("override");
    auto cfg = write_config(dir);
    pl_engine* e = pl_engine_create(cfg.string().c_str());
    REQUIRE(e != nullptr);
    auto out2 = (dir / "out2").string();
    CHECK(pl_engine_set_override(e, "output_dir", out2.c_str()) == PL_OK);
    CHECK(pl_engine_set_override(e, "max_simulations", "10") == PL_OK);
    CHECK(pl_engine_set_override(e, "bogus_key", "x") == PL_ERR_VALIDATION);
    CHECK(std::string(pl_last_error(e)).find("bogus_key") != std::string::npos);
    CHECK(pl_engine_probe(e) == PL_OK);
    CHECK(fs::exists(fs::path(out2) / "report.json"));
    auto j = nlohmann::json::parse(std::ifstream(fs::path(out2) / "report.json"));
    CHECK(j["metrics"]["simulations"].get<long>() <= 10);
    pl_engine_free(e);
}

TEST_CASE("interrupt + resume through the C API") {
    auto dir = fresh_dir("resume");
    auto cfg = write_config(dir);
    pl_engine* e = pl_engine_create(cfg.string().c_str());
    REQUIRE(e != nullptr);
    CHECK(pl_engine_probe_interrupted(e, 10) == PL_ERR_RUNTIME);
    auto ckpt = (dir / "out" / "checkpoint.json").string();
    REQUIRE(fs::exists(ckpt));
    CHECK(pl_engine_resume(e, ckpt.c_str()) == PL_OK);
    CHECK(fs::exists(dir / "out" / "report.json"));

    // Changed config refuses the checkpoint.
    CHECK(pl_engine_set_override(e, "rng_seed", "999") == PL_OK);
    CHECK(pl_engine_resume(e, ckpt.c_str()) == PL_ERR_RESUME_REFUSED);
    pl_engine_free(e);
}
