#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <omp.h>

#include "CLI11.hpp"

#include "pcaplab/errors.hpp"
#include "pcaplab/experiment.hpp"
#include "pcaplab/numfmt.hpp"

using namespace pcaplab;

namespace {

struct CommonFlags {
    std::string config;
    std::string out;
    std::vector<std::string> fixtures;
    std::vector<double> p;
    double h = 0.0;
    bool json = false;
    bool verbose = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "experiment configuration file");
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("--fixture", f.fixtures, "fixture shape tags")->delimiter(',');
    cmd->add_option("--p", f.p, "p values")->delimiter(',');
    cmd->add_option("--h", f.h, "grid spacing");
    cmd->add_flag("--json", f.json, "print the manifest as JSON");
    cmd->add_flag("-v,--verbose", f.verbose, "progress on stderr");
}

ExperimentConfig build_config(const CommonFlags& f, const std::vector<std::string>& verb_checks) {
    ExperimentConfig c = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
    if (!f.fixtures.empty()) {
        c.fixtures.clear();
        for (const auto& tag : f.fixtures) c.fixtures.push_back({tag, parse_shape_tag(tag), {}});
    }
    if (c.fixtures.empty()) c.fixtures.push_back({"ball", ShapeTag::Ball, {}});
    if (!f.p.empty()) c.p_list = f.p;
    if (f.h > 0) {
        c.h = f.h;
        if (c.hull_h < f.h) c.hull_h = f.h;
    }
    if (!f.out.empty()) c.output_dir = f.out;
    if (!verb_checks.empty()) c.checks = verb_checks;
    c.validate();
    return c;
}

void print_table(const RunManifest& m) {
    for (const auto& c : m.checks) {
        std::cout << to_string(c.verdict) << "  " << c.check << "  " << c.fixture;
        if (c.p > 0) std::cout << "  p=" << format_number(c.p);
        std::cout << "\n";
    }
    for (const auto& r : m.reports) {
        std::cout << to_string(r.verdict) << "  " << r.name << "  " << r.inputs.value("fixture", std::string());
        if (r.inputs.contains("p")) std::cout << "  p=" << format_number(r.inputs["p"].get<double>());
        std::cout << "  lhs=" << format_number(r.lhs) << "  rhs=" << format_number(r.rhs) << "  gap=" << format_number(r.gap)
                  << "\n";
    }
    for (const auto& e : m.errors) std::cout << "ERROR  " << e << "\n";
    std::cout << "overall " << (m.pass ? "PASS" : "FAIL") << "  (" << m.config.output_dir << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
    if (const char* t = std::getenv("PCAPLAB_THREADS")) {
        const int threads = std::atoi(t);
        if (threads > 0) omp_set_num_threads(threads);
    }

    CLI::App app{"pcaplab: p-capacitary potentials, hulls and geometric inequalities"};
    app.set_help_flag("--help", "print this help message and exit");
    app.require_subcommand(1);

    CommonFlags solve_f, quant_f, hull_f, verify_f;
    auto* solve = app.add_subcommand("solve", "solve for the capacitary potential and report capacities");
    add_common(solve, solve_f);
    auto* quant = app.add_subcommand("quantities", "capacities, U_p profile, effective checks, asymptotics, Kato");
    add_common(quant, quant_f);
    auto* hull = app.add_subcommand("hull", "outward minimising hull by total variation");
    add_common(hull, hull_f);
    auto* verify = app.add_subcommand("verify", "run every configured check and inequality report");
    add_common(verify, verify_f);

    std::string run_a, run_b;
    double rel_tol = 1e-9;
    bool compare_json = false;
    auto* compare = app.add_subcommand("compare", "compare two runs");
    compare->add_option("run_a", run_a, "manifest or run directory")->required();
    compare->add_option("run_b", run_b, "manifest or run directory")->required();
    compare->add_option("--rel-tol", rel_tol, "relative tolerance");
    compare->add_flag("--json", compare_json, "print the diff as JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (compare->parsed()) {
            const RunDiff d = compare_runs(load_manifest(run_a), load_manifest(run_b), rel_tol);
            if (compare_json) {
                std::cout << to_json(d).dump(1) << "\n";
            } else {
                for (const auto& s : d.structure) std::cout << "STRUCTURE  " << s << "\n";
                for (const auto& e : d.drift)
                    std::cout << "DRIFT  " << e.key << "  " << format_number(e.a) << "  " << format_number(e.b) << "  rel="
                              << format_number(e.relative) << "\n";
                std::cout << (d.empty() ? "identical within tolerance\n" : "runs differ\n");
            }
            return d.empty() ? 0 : 1;
        }

        ExperimentConfig config;
        const CommonFlags* flags = nullptr;
        if (solve->parsed()) {
            flags = &solve_f;
            config = build_config(solve_f, {"capacity"});
        } else if (quant->parsed()) {
            flags = &quant_f;
            config = build_config(quant_f, {"capacity", "up_profile", "effective_I", "effective_II", "asymptotics", "kato"});
        } else if (hull->parsed()) {
            flags = &hull_f;
            config = build_config(hull_f, {"hull"});
        } else {
            flags = &verify_f;
            config = build_config(verify_f, {});
        }
        const RunManifest m = run_experiment(config, flags->verbose);
        if (flags->json) {
            std::cout << to_json(m).dump(1) << "\n";
        } else {
            print_table(m);
        }
        return m.pass ? 0 : 1;
    } catch (const PreconditionError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
