#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "pcaplab/errors.hpp"
#include "pcaplab/experiment.hpp"

using namespace pcaplab;

TEST(Config, ParsesSectionsAndDefaults) {
    const auto c = parse_config(
        "[experiment]\nfixtures = ball, fat\np = 1.5, 2.0\nh = 0.0625\nchecks = capacity, lp_minkowski\n"
        "[fixture:fat]\nshape = ellipsoid\na = 1.2\nb = 1.0\nc = 0.9\n");
    ASSERT_EQ(c.fixtures.size(), 2u);
    EXPECT_EQ(c.fixtures[0].tag, ShapeTag::Ball);
    EXPECT_EQ(c.fixtures[1].tag, ShapeTag::Ellipsoid);
    EXPECT_DOUBLE_EQ(c.fixtures[1].parameters.at("a"), 1.2);
    EXPECT_EQ(c.p_list, (std::vector<double>{1.5, 2.0}));
    EXPECT_TRUE(c.wants("capacity"));
    EXPECT_FALSE(c.wants("hull"));
    const auto again = parse_config(config_to_text(c));
    EXPECT_EQ(to_json(again), to_json(c));
}

TEST(Config, RejectsInvalidInput) {
    EXPECT_THROW(parse_config("[experiment]\nfixtures = ball\nchecks = capacity, nonsense\n"), PreconditionError);
    EXPECT_THROW(parse_config("[experiment]\nfixtures = ball\np = 3.2\n"), PreconditionError);
    EXPECT_THROW(parse_config("[experiment]\nfixtures = cube\n"), PreconditionError);
    EXPECT_THROW(parse_config("[experiment]\nfixtures = ball\nh = abc\n"), PreconditionError);
    EXPECT_THROW(parse_config("[experiment]\nfixtures = ball\n[fixture:other]\nradius = 2\n"), PreconditionError);
    EXPECT_THROW(parse_config("[experiment]\nfixtures = ball\ncolour = red\n"), PreconditionError);
    EXPECT_THROW(parse_config("fixtures = ball\n"), PreconditionError);
}

TEST(Manifest, Sha256KnownVector) {
    const auto path = std::filesystem::temp_directory_path() / "pcaplab_sha_test.txt";
    std::ofstream(path) << "abc";
    EXPECT_EQ(sha256_file(path.string()), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    std::filesystem::remove(path);
}

TEST(Compare, ReflexiveDriftAndStructure) {
    RunManifest a;
    a.reports.push_back(make_report("lp_minkowski", 1.0, 1.1, 0.05, {{"fixture", "ball"}, {"p", 1.5}}));
    a.checks.push_back({"capacity", "ball", 1.5, Verdict::Pass, {{"cap_energy", 1.0}}});
    EXPECT_TRUE(compare_runs(a, a, 0.0).empty());

    RunManifest b = a;
    b.checks[0].data["cap_energy"] = 1.01;
    const auto d = compare_runs(a, b, 0.005);
    EXPECT_FALSE(d.structural_mismatch);
    ASSERT_EQ(d.drift.size(), 1u);
    EXPECT_TRUE(compare_runs(a, b, 0.02).empty());

    RunManifest c = a;
    c.checks[0].fixture = "ellipsoid";
    EXPECT_TRUE(compare_runs(a, c, 0.5).structural_mismatch);
}

TEST(Run, InvalidCheckRejectedBeforeSolving) {
    ExperimentConfig c;
    c.fixtures.push_back({"ball", ShapeTag::Ball, {}});
    c.checks = {"capacity", "bogus"};
    c.output_dir = (std::filesystem::temp_directory_path() / "pcaplab_never_written").string();
    std::filesystem::remove_all(c.output_dir);
    EXPECT_THROW(run_experiment(c), PreconditionError);
    EXPECT_FALSE(std::filesystem::exists(c.output_dir));
}

TEST(Run, GeometryOnlyRunIsDeterministicAndHashed) {
    ExperimentConfig c;
    c.fixtures.push_back({"ball", ShapeTag::Ball, {}});
    c.h = 1.0 / 16.0;
    c.checks = {"gauss_bonnet", "willmore_topology", "volumetric_minkowski", "nearly_umbilical"};
    const auto base = std::filesystem::temp_directory_path();
    c.output_dir = (base / "pcaplab_run_a").string();
    const RunManifest a = run_experiment(c);
    c.output_dir = (base / "pcaplab_run_b").string();
    const RunManifest b = run_experiment(c);
    EXPECT_TRUE(a.pass);
    ASSERT_EQ(a.artifacts.size(), b.artifacts.size());
    for (std::size_t k = 0; k < a.artifacts.size(); ++k) {
        EXPECT_EQ(a.artifacts[k].path, b.artifacts[k].path);
        EXPECT_EQ(a.artifacts[k].sha256, b.artifacts[k].sha256);
        EXPECT_EQ(sha256_file((base / "pcaplab_run_a" / a.artifacts[k].path).string()), a.artifacts[k].sha256);
    }
    const RunManifest loaded = load_manifest((base / "pcaplab_run_a").string());
    EXPECT_TRUE(compare_runs(a, loaded, 1e-10).empty());
}
