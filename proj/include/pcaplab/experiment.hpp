#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "pcaplab/inequality.hpp"
#include "pcaplab/shapes.hpp"

namespace pcaplab {

struct FixtureSpec {
    std::string label;
    ShapeTag tag = ShapeTag::Ball;
    std::map<std::string, double> parameters;
};

/// Check names accepted in a configuration.
const std::vector<std::string>& known_checks();

struct ExperimentConfig {
    std::vector<FixtureSpec> fixtures;
    std::vector<double> p_list{1.5};
    double h = 1.0 / 32.0;
    double r_out_factor = 4.0;        // R_out = factor * circumradius
    std::vector<double> taus;         // empty: 0.1, 0.2, ..., 0.9
    std::vector<std::string> checks;  // empty or "all": every known check
    std::string output_dir = "pcaplab_run";
    unsigned seed = 0;                // picks the Kato sample points
    double hull_h = 1.0 / 16.0;
    std::vector<double> extrapolation_p;  // empty: no capacity extrapolation route
    double tolerance = 0.05;

    bool wants(const std::string& check) const;
    /// Throws PreconditionError on an unknown check, fixture, or p outside the solver range.
    void validate() const;
};

/// Flat key/value text with section headers:
///
///   [experiment]
///   fixtures = ball, ellipsoid
///   p = 1.5, 2.0
///   h = 0.03125
///   checks = all
///
///   [fixture:ball]
///   shape = ball
///   radius = 1
///
/// A fixture without a section uses its label as the shape name and default parameters.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string config_to_text(const ExperimentConfig& config);
nlohmann::json to_json(const ExperimentConfig& config);

struct CheckResult {
    std::string check;
    std::string fixture;
    double p = 0.0;                   // 0 when not tied to a solve
    Verdict verdict = Verdict::Fail;
    nlohmann::json data = nlohmann::json::object();
};

struct ArtifactEntry {
    std::string path;                 // relative to the run directory
    std::string sha256;
    std::uintmax_t bytes = 0;
};

struct RunManifest {
    ExperimentConfig config;
    std::vector<std::pair<std::string, double>> timings;  // step label, seconds
    std::vector<ArtifactEntry> artifacts;
    std::vector<InequalityReport> reports;
    std::vector<CheckResult> checks;
    std::vector<std::string> errors;  // module errors with fixture/p context
    bool pass = false;
};

/// Seeded points outside the domain, every coordinate at least 0.2 |x| away
/// from the mirror planes, at radius 1.3 to 2.5 circumradii, |x| <= 0.6 R_out
/// and at least 4h from the boundary.
std::vector<Vec3> kato_points(const ImplicitDomain& domain, double h, double R_out, unsigned seed, int count);

/// Hex SHA-256 of a file's contents.
std::string sha256_file(const std::string& path);

/// Runs solve, quantities, hull and reports for every fixture and p; writes
/// reports.json, reports.csv, checks.json, per-cell CSV/JSON and binary
/// artifacts and manifest.json into config.output_dir. Module errors are
/// recorded and the run continues; a FAILED marker file is written when any
/// occurred.
RunManifest run_experiment(const ExperimentConfig& config, bool verbose = false);

nlohmann::json to_json(const CheckResult& c);
nlohmann::json to_json(const RunManifest& m);
RunManifest load_manifest(const std::string& path);

struct DriftEntry {
    std::string key;
    double a = 0.0;
    double b = 0.0;
    double relative = 0.0;
};

struct RunDiff {
    bool structural_mismatch = false;
    std::vector<std::string> structure;  // keys present in only one run
    std::vector<DriftEntry> drift;       // numeric entries beyond rel_tol
    bool empty() const { return !structural_mismatch && drift.empty(); }
};

/// Compares every numeric entry of the reports and checks of two runs (inputs
/// excluded). Entries are keyed by fixture, p and name, so differing check
/// sets show up as structure rather than drift.
RunDiff compare_runs(const RunManifest& a, const RunManifest& b, double rel_tol);
nlohmann::json to_json(const RunDiff& d);

}  // namespace pcaplab
