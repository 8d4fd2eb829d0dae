#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "mskit/config.hpp"
#include "mskit/pipeline.hpp"
#include "mskit/report.hpp"

using namespace mskit;
using nlohmann::json;

namespace {

json base() {
    return json::parse(R"({
        "cluster": {"generator": "fcc_first_shell", "lattice_a": 3.61},
        "species": [{"id": 0, "lpt": 2, "rb": 2.3, "square_well": {"v0": -0.5}}],
        "l_max": 3,
        "energy": {"start": 0.4, "stop": 0.8, "points": 3, "imag": 0.01},
        "modes": ["standard", "ours-dense", "ours-sparse", "zhang"],
        "sparsify": {"p": 0.1}
    })");
}

std::string error_of(const json& j) {
    try {
        build_model(parse_config(j));
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Config, Defaults) {
    const auto c = parse_config(json::object());
    EXPECT_EQ(c.l_max, 4);
    EXPECT_EQ(c.energy.points, 30);
    EXPECT_EQ(c.modes.size(), 3u);
    EXPECT_EQ(c.cluster.generator, "fcc_first_shell");
    EXPECT_FALSE(c.timing);
}

TEST(Config, UnknownKeysRejected) {
    auto j = base();
    j["lmax"] = 3;
    EXPECT_NE(error_of(j).find("unknown key 'lmax'"), std::string::npos);
    j = base();
    j["species"][0]["square_well"]["depth"] = 1;
    EXPECT_NE(error_of(j).find("species[0].square_well"), std::string::npos);
}

TEST(Config, FieldNamedInErrors) {
    auto j = base();
    j["species"][0]["lpt"] = 5;
    EXPECT_NE(error_of(j).find("species[0].lpt"), std::string::npos);
    j = base();
    j["sparsify"]["p"] = 0.0;
    EXPECT_NE(error_of(j).find("sparsify.p"), std::string::npos);
    j = base();
    j["modes"] = {"standard", "fastest"};
    EXPECT_NE(error_of(j).find("modes"), std::string::npos);
    j = base();
    j["energy"]["stop"] = 0.1;
    EXPECT_NE(error_of(j).find("energy.stop"), std::string::npos);
    j = base();
    j["species"][0]["id"] = 4;
    EXPECT_NE(error_of(j).find("species 0"), std::string::npos);
}

TEST(Config, EnergyInEv) {
    auto j = base();
    j["energy"] = {{"start", 2.0}, {"stop", 20.0}, {"points", 2}, {"imag", 0.0272}, {"unit", "ev"}};
    const auto c = parse_config(j);
    EXPECT_NEAR(c.energy.start, 2.0 / kEvPerHartree, 1e-15);
    EXPECT_NEAR(c.energy.imag, 0.0272 / kEvPerHartree, 1e-15);
    EXPECT_EQ(c.energy.values().size(), 2u);
}

TEST(Config, HashFollowsContent) {
    const auto a = parse_config(base());
    auto j = base();
    EXPECT_EQ(config_hash(parse_config(j)), config_hash(a));
    j["l_max"] = 4;
    EXPECT_NE(config_hash(parse_config(j)), config_hash(a));
    EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(Config, ModelDefaults) {
    auto j = base();
    j["species"][0].erase("lpt");
    j["species"][0].erase("rb");
    const Model m = build_model(parse_config(j));
    EXPECT_EQ(m.cluster().size(), 13);
    EXPECT_EQ(m.scheme().lpt(0), 3);
    EXPECT_NEAR(m.cluster().species(0).rb, 0.5 * 3.61 * kBohrPerAngstrom / std::sqrt(2.0), 1e-12);
}

TEST(Config, SweepAndReports) {
    const auto cfg = parse_config(base());
    const Model m = build_model(cfg);
    const auto sw = tau_sweep(m, cfg);
    EXPECT_EQ(sw.failures, 0);
    ASSERT_EQ(sw.records.size(), 12u);
    for (const auto& r : sw.records) {
        if (r.mode.kind == Mode::standard) {
            EXPECT_EQ(r.err.frobenius_rel, 0.0);
        }
        EXPECT_GT(r.predicted.total(), 0.0);
    }
    const auto dir = std::filesystem::temp_directory_path() / "mskit_config_test";
    std::filesystem::remove_all(dir);
    write_tau_reports(dir, m, cfg, sw);
    std::ifstream in(dir / "report.json");
    const json rep = json::parse(in);
    EXPECT_EQ(rep["records"].size(), 12u);
    EXPECT_EQ(rep["config_hash"], config_hash(cfg));
    EXPECT_TRUE(rep["records"][0]["wall_ms"].is_null());
    std::ifstream csv(dir / "tau_errors.csv");
    std::string first;
    std::getline(csv, first);
    EXPECT_EQ(first.rfind("# mskit ", 0), 0u);
    std::filesystem::remove_all(dir);

    // same config twice, same bytes
    const auto sw2 = tau_sweep(m, cfg);
    EXPECT_EQ(tau_report_json(m, cfg, sw2).dump(), tau_report_json(m, cfg, sw).dump());
}

TEST(Config, LoadErrors) {
    EXPECT_THROW(load_config("/nonexistent/cfg.json"), ConfigError);
    const auto p = std::filesystem::temp_directory_path() / "mskit_bad.json";
    std::ofstream(p) << "{ \"l_max\": ";
    EXPECT_THROW(load_config(p.string()), ConfigError);
    std::filesystem::remove(p);
}
