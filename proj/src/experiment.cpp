#include "pcaplab/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

#include "pcaplab/curvature.hpp"
#include "pcaplab/errors.hpp"
#include "pcaplab/hull.hpp"
#include "pcaplab/marching.hpp"
#include "pcaplab/numfmt.hpp"
#include "pcaplab/potential.hpp"
#include "pcaplab/quantities.hpp"

namespace fs = std::filesystem;

namespace pcaplab {

namespace {

using Clock = std::chrono::steady_clock;

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> parts;
    boost::split(parts, text, boost::is_any_of(","));
    std::vector<std::string> out;
    for (auto& s : parts) {
        boost::trim(s);
        if (!s.empty()) out.push_back(s);
    }
    return out;
}

double parse_double(const std::string& key, const std::string& text) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw PreconditionError("config: '" + key + "' expects a number, got '" + text + "'");
    }
}

std::vector<double> parse_doubles(const std::string& key, const std::string& text) {
    std::vector<double> out;
    for (const auto& s : split_list(text)) out.push_back(parse_double(key, s));
    return out;
}

std::string join_numbers(const std::vector<double>& v) {
    std::string out;
    for (std::size_t k = 0; k < v.size(); ++k) out += (k ? ", " : "") + format_number(v[k]);
    return out;
}

std::string p_tag(double p) { return "p" + format_number(p); }

struct Sink {
    fs::path dir;
    std::vector<ArtifactEntry> artifacts;

    std::string path(const std::string& name) const { return (dir / name).string(); }
    void record(const std::string& name) {
        ArtifactEntry e;
        e.path = name;
        e.sha256 = sha256_file(path(name));
        e.bytes = fs::file_size(dir / name);
        artifacts.push_back(e);
    }
    void write_text(const std::string& name, const std::string& text) {
        std::ofstream out(path(name), std::ios::binary);
        if (!out) throw PreconditionError("cannot write " + path(name));
        out << text;
        out.close();
        record(name);
    }
    void write_json(const std::string& name, const nlohmann::json& j) { write_text(name, j.dump(1) + "\n"); }
};

Verdict verdict_of(bool pass) { return pass ? Verdict::Pass : Verdict::Fail; }

std::vector<double> default_taus() {
    std::vector<double> t;
    for (int k = 1; k <= 9; ++k) t.push_back(0.1 * k);
    return t;
}

std::vector<std::array<double, 2>> l_shape_polygon(double arm) {
    return {{0, 0}, {2 * arm, 0}, {2 * arm, arm}, {arm, arm}, {arm, 2 * arm}, {0, 2 * arm}};
}

struct FixtureState {
    const FixtureSpec* spec = nullptr;
    std::optional<ImplicitDomain> domain;
    SurfaceMesh mesh;
    bool has_mesh = false;
    std::optional<HullField> hull;
    double hull_error = 0.0;
    std::optional<OutwardMinimisingVerdict> gate;
};

}  // namespace

std::vector<Vec3> kato_points(const ImplicitDomain& domain, double h, double R_out, unsigned seed, int count) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> radius(1.3, 2.5);
    const double circ = domain.info().circumradius;
    std::vector<Vec3> pts;
    for (int attempt = 0; attempt < 10000 && static_cast<int>(pts.size()) < count; ++attempt) {
        Vec3 d(unit(rng), unit(rng), unit(rng));
        if (d.norm() < 1e-3) continue;
        d.normalize();
        if (d.cwiseAbs().minCoeff() < 0.2) continue;
        const Vec3 x = radius(rng) * circ * d;
        if (x.norm() > 0.6 * R_out) continue;
        if (domain.distance_estimate(x) < 4.0 * h) continue;
        pts.push_back(x);
    }
    return pts;
}

const std::vector<std::string>& known_checks() {
    static const std::vector<std::string> names = {
        "capacity",          "up_profile",           "effective_I",
        "effective_II",      "asymptotics",          "kato",
        "moser",             "lp_minkowski",         "hull",
        "extended_minkowski", "volumetric_minkowski", "outward_minimising_minkowski",
        "nearly_umbilical",  "willmore_topology",    "gauss_bonnet"};
    return names;
}

bool ExperimentConfig::wants(const std::string& check) const {
    if (checks.empty()) return true;
    return std::find(checks.begin(), checks.end(), "all") != checks.end() ||
           std::find(checks.begin(), checks.end(), check) != checks.end();
}

void ExperimentConfig::validate() const {
    if (fixtures.empty()) throw PreconditionError("config: no fixtures");
    for (const auto& c : checks) {
        if (c == "all") continue;
        const auto& k = known_checks();
        if (std::find(k.begin(), k.end(), c) == k.end()) throw PreconditionError("config: unknown check '" + c + "'");
    }
    if (!(h > 0) || !(hull_h > 0)) throw PreconditionError("config: grid spacings must be positive");
    if (!(r_out_factor >= 3.0)) throw PreconditionError("config: r_out_factor must be at least 3");
    if (!(tolerance > 0 && tolerance < 1)) throw PreconditionError("config: tolerance must lie in (0, 1)");
    for (double t : taus)
        if (!(t > 0 && t < 1)) throw PreconditionError("config: tau values must lie in (0, 1)");
    if (p_list.empty()) throw PreconditionError("config: empty p list");
    std::set<std::string> labels;
    for (const auto& f : fixtures) {
        if (!labels.insert(f.label).second) throw PreconditionError("config: duplicate fixture '" + f.label + "'");
        const ImplicitDomain d = make_shape(f.tag, f.parameters);
        const int n = d.dimension();
        if (n == 3) {
            for (double p : p_list) {
                if (!(p >= 1.05 && p <= std::min(2.8, n - 0.2)))
                    throw PreconditionError("config: p = " + format_number(p) + " outside [1.05, 2.8]");
            }
        }
    }
    if (!extrapolation_p.empty()) {
        if (extrapolation_p.size() < 4) throw PreconditionError("config: extrapolation_p needs at least 4 values");
        for (double p : extrapolation_p)
            if (!(p >= 1.05 && p <= 1.5)) throw PreconditionError("config: extrapolation_p values must lie in [1.05, 1.5]");
    }
}

ExperimentConfig parse_config(const std::string& text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw PreconditionError(std::string("config: ") + e.what());
    }
    const auto exp_it = tree.find("experiment");
    if (exp_it == tree.not_found()) throw PreconditionError("config: missing [experiment] section");
    const pt::ptree& ex = exp_it->second;

    ExperimentConfig c;
    static const std::set<std::string> keys = {"fixtures", "p", "h", "r_out_factor", "tau", "checks", "output",
                                               "seed", "hull_h", "extrapolation_p", "tolerance"};
    for (const auto& [key, node] : ex) {
        if (!keys.count(key)) throw PreconditionError("config: unknown key '" + key + "' in [experiment]");
        const std::string v = node.data();
        if (key == "fixtures") {
            for (const auto& label : split_list(v)) c.fixtures.push_back({label, ShapeTag::Ball, {}});
        } else if (key == "p") {
            c.p_list = parse_doubles(key, v);
        } else if (key == "h") {
            c.h = parse_double(key, v);
        } else if (key == "r_out_factor") {
            c.r_out_factor = parse_double(key, v);
        } else if (key == "tau") {
            c.taus = parse_doubles(key, v);
        } else if (key == "checks") {
            c.checks = split_list(v);
        } else if (key == "output") {
            c.output_dir = boost::trim_copy(v);
        } else if (key == "seed") {
            const double s = parse_double(key, v);
            if (s < 0 || s != std::floor(s)) throw PreconditionError("config: seed must be a non-negative integer");
            c.seed = static_cast<unsigned>(s);
        } else if (key == "hull_h") {
            c.hull_h = parse_double(key, v);
        } else if (key == "extrapolation_p") {
            c.extrapolation_p = parse_doubles(key, v);
        } else if (key == "tolerance") {
            c.tolerance = parse_double(key, v);
        }
    }
    for (auto& f : c.fixtures) {
        const auto it = tree.find("fixture:" + f.label);
        if (it == tree.not_found()) {
            f.tag = parse_shape_tag(f.label);
            continue;
        }
        std::string shape = f.label;
        for (const auto& [key, node] : it->second) {
            if (key == "shape") {
                shape = boost::trim_copy(node.data());
            } else {
                f.parameters[key] = parse_double(key, node.data());
            }
        }
        f.tag = parse_shape_tag(shape);
    }
    for (const auto& [section, node] : tree) {
        if (section == "experiment") continue;
        if (!boost::starts_with(section, "fixture:")) throw PreconditionError("config: unknown section [" + section + "]");
        const std::string label = section.substr(8);
        if (std::none_of(c.fixtures.begin(), c.fixtures.end(), [&](const FixtureSpec& f) { return f.label == label; }))
            throw PreconditionError("config: section [" + section + "] names no listed fixture");
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw PreconditionError("config: cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string config_to_text(const ExperimentConfig& c) {
    std::ostringstream out;
    out << "[experiment]\n";
    out << "fixtures = ";
    for (std::size_t k = 0; k < c.fixtures.size(); ++k) out << (k ? ", " : "") << c.fixtures[k].label;
    out << "\np = " << join_numbers(c.p_list) << "\n";
    out << "h = " << format_number(c.h) << "\n";
    out << "r_out_factor = " << format_number(c.r_out_factor) << "\n";
    if (!c.taus.empty()) out << "tau = " << join_numbers(c.taus) << "\n";
    if (!c.checks.empty()) out << "checks = " << boost::join(c.checks, ", ") << "\n";
    out << "output = " << c.output_dir << "\n";
    out << "seed = " << c.seed << "\n";
    out << "hull_h = " << format_number(c.hull_h) << "\n";
    if (!c.extrapolation_p.empty()) out << "extrapolation_p = " << join_numbers(c.extrapolation_p) << "\n";
    out << "tolerance = " << format_number(c.tolerance) << "\n";
    for (const auto& f : c.fixtures) {
        out << "\n[fixture:" << f.label << "]\nshape = " << to_string(f.tag) << "\n";
        for (const auto& [k, v] : f.parameters) out << k << " = " << format_number(v) << "\n";
    }
    return out.str();
}

nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json fixtures = nlohmann::json::array();
    for (const auto& f : c.fixtures) {
        nlohmann::json params = nlohmann::json::object();
        for (const auto& [k, v] : f.parameters) params[k] = round12(v);
        fixtures.push_back({{"label", f.label}, {"shape", to_string(f.tag)}, {"parameters", params}});
    }
    auto rounded = [](const std::vector<double>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (double x : v) a.push_back(round12(x));
        return a;
    };
    return {{"fixtures", fixtures},
            {"p", rounded(c.p_list)},
            {"h", round12(c.h)},
            {"r_out_factor", round12(c.r_out_factor)},
            {"tau", rounded(c.taus.empty() ? default_taus() : c.taus)},
            {"checks", c.checks.empty() ? std::vector<std::string>{"all"} : c.checks},
            {"output", c.output_dir},
            {"seed", c.seed},
            {"hull_h", round12(c.hull_h)},
            {"extrapolation_p", rounded(c.extrapolation_p)},
            {"tolerance", round12(c.tolerance)}};
}

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PreconditionError("cannot read " + path);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned int k = 0; k < len; ++k) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[k]);
    return hex.str();
}

RunManifest run_experiment(const ExperimentConfig& config, bool verbose) {
    config.validate();
    RunManifest m;
    m.config = config;
    Sink sink;
    sink.dir = config.output_dir;
    fs::create_directories(sink.dir);
    fs::remove(sink.dir / "FAILED");
    const double tol = config.tolerance;
    const std::vector<double> taus = config.taus.empty() ? default_taus() : config.taus;

    auto log = [&](const std::string& s) {
        if (verbose) std::cerr << "[pcaplab] " << s << std::endl;
    };
    auto timed = [&](const std::string& label, auto&& fn) {
        const auto t0 = Clock::now();
        fn();
        m.timings.emplace_back(label, std::chrono::duration<double>(Clock::now() - t0).count());
    };
    auto add_check = [&](const std::string& name, const std::string& fixture, double p, Verdict v, nlohmann::json data) {
        m.checks.push_back({name, fixture, p, v, std::move(data)});
    };
    auto add_report = [&](InequalityReport r, const FixtureSpec& f, double p) {
        r.inputs["fixture"] = f.label;
        r.inputs["shape"] = to_string(f.tag);
        if (p > 0) r.inputs["p"] = round12(p);
        if (!r.inputs.contains("h")) r.inputs["h"] = round12(config.h);
        m.reports.push_back(std::move(r));
    };
    auto guarded = [&](const std::string& context, auto&& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            m.errors.push_back(context + ": " + e.what());
            log("error in " + context + ": " + e.what());
        }
    };

    for (const auto& spec : config.fixtures) {
        FixtureState st;
        st.spec = &spec;
        st.domain.emplace(make_shape(spec.tag, spec.parameters));
        const ImplicitDomain& domain = *st.domain;
        const int n = domain.dimension();
        const double circ = domain.info().circumradius;
        const double R_out = config.r_out_factor * circ;
        const std::string fx = spec.label;

        auto ensure_hull = [&]() -> const HullField& {
            if (!st.hull) {
                HullOptions ho;
                ho.h = config.hull_h;
                timed(fx + "/hull", [&] { st.hull.emplace(minimise_tv_obstacle(domain, ho)); });
                save_hull(sink.path("hull_" + fx + ".bin"), *st.hull);
                sink.record("hull_" + fx + ".bin");
                // Error bar from the next coarser lattice.
                try {
                    HullOptions coarse = ho;
                    coarse.h = 2.0 * config.hull_h;
                    HullField hc;
                    timed(fx + "/hull_coarse", [&] { hc = minimise_tv_obstacle(domain, coarse); });
                    st.hull_error = std::abs(st.hull->perimeter_estimate - hc.perimeter_estimate);
                } catch (const std::exception& e) {
                    st.hull_error = tol * st.hull->perimeter_estimate;
                    st.hull->warnings.push_back(std::string("coarse hull unavailable: ") + e.what());
                }
                nlohmann::json j = to_json(*st.hull);
                j["perimeter_error"] = round12(st.hull_error);
                sink.write_json("hull_" + fx + ".json", j);
            }
            return *st.hull;
        };

        if (n == 2) {
            // Planar fixtures only carry the hull computation.
            for (const auto& name : known_checks()) {
                if (!config.wants(name)) continue;
                if (name != "hull") {
                    add_check(name, fx, 0.0, Verdict::Skipped, {{"reason", "planar fixture"}});
                    continue;
                }
                guarded(fx + " hull", [&] {
                    const HullField& H = ensure_hull();
                    nlohmann::json d = {{"perimeter", round12(H.perimeter_estimate)}, {"error", round12(st.hull_error)}};
                    bool pass = true;
                    if (spec.tag == ShapeTag::LShape2D) {
                        const double arm = spec.parameters.count("arm") ? spec.parameters.at("arm") : 1.0;
                        const double scale = spec.parameters.count("scale") ? spec.parameters.at("scale") : 1.0;
                        auto poly = l_shape_polygon(arm * scale);
                        const double oracle = convex_hull_2d_oracle(poly);
                        const double rel = std::abs(H.perimeter_estimate - oracle) / oracle;
                        d["oracle"] = round12(oracle);
                        d["relative_error"] = round12(rel);
                        pass = rel <= 0.03;
                    }
                    add_check("hull", fx, 0.0, verdict_of(pass), d);
                });
            }
            continue;
        }

        guarded(fx + " mesh", [&] {
            timed(fx + "/mesh", [&] {
                st.mesh = extract_boundary_mesh(domain, std::min(config.h, domain.info().feature_size / 8.0));
                mesh_curvatures(st.mesh);
            });
            st.has_mesh = true;
            write_off_file(sink.path("mesh_" + fx + ".off"), st.mesh);
            sink.record("mesh_" + fx + ".off");
        });
        if (!st.has_mesh) continue;
        const SurfaceMesh& mesh = st.mesh;
        const double area = total_area(mesh);

        auto gate = [&]() -> const OutwardMinimisingVerdict& {
            if (!st.gate) {
                OutwardMinimisingVerdict g = convexity_gate(mesh);
                if (!g.outward_minimising) g = is_outward_minimising(ensure_hull().perimeter_estimate, area, tol);
                st.gate = g;
            }
            return *st.gate;
        };

        // Per-p cells.
        for (double p : config.p_list) {
            const bool solve_needed = config.wants("capacity") || config.wants("up_profile") || config.wants("effective_I") ||
                                      config.wants("effective_II") || config.wants("asymptotics") || config.wants("kato") ||
                                      config.wants("moser") || config.wants("lp_minkowski");
            if (!solve_needed) break;
            const std::string cell = fx + "_" + p_tag(p);
            guarded(fx + " p=" + format_number(p), [&] {
                SolveOptions so;
                so.p = p;
                so.h = config.h;
                so.R_out = R_out;
                log("solving " + cell);
                PotentialField F;
                timed(cell + "/solve", [&] { F = solve_exterior(domain, so); });
                save_field(sink.path("field_" + cell + ".bin"), F);
                sink.record("field_" + cell + ".bin");

                BoundaryGradient bg;
                CapacityReport cr;
                timed(cell + "/capacity", [&] {
                    bg = boundary_gradient(F, mesh);
                    cr = capacity_report(F, mesh, bg);
                });
                nlohmann::json q = {{"fixture", fx}, {"p", round12(p)}, {"h", round12(config.h)}, {"R_out", round12(R_out)}};
                q["capacity"] = to_json(cr);
                nlohmann::json warnings = F.warnings;
                q["solver_warnings"] = warnings;
                if (config.wants("capacity"))
                    add_check("capacity", fx, p, verdict_of(cr.discrepancy <= tol), to_json(cr));

                const bool want_up = config.wants("up_profile") || config.wants("effective_I") || config.wants("effective_II");
                if (want_up) {
                    UpProfile up;
                    timed(cell + "/up_profile", [&] { up = up_profile(F, mesh, bg, taus, cr.cap_used); });
                    const PhiProfile phi = phi_profile(up);
                    std::ostringstream csv;
                    write_up_profile_csv(csv, up);
                    sink.write_text("up_" + cell + ".csv", csv.str());
                    q["up_profile"] = to_json(up);
                    q["phi"] = to_json(phi);
                    if (config.wants("up_profile")) {
                        // U_p is nondecreasing in tau; adjacent resolved levels must not drop beyond their error bars.
                        double worst = 0.0, umax = 0.0;
                        for (double u : up.U)
                            if (std::isfinite(u)) umax = std::max(umax, std::abs(u));
                        for (std::size_t k = 0; k + 1 < up.U.size(); ++k) {
                            if (!std::isfinite(up.U[k]) || !std::isfinite(up.U[k + 1])) continue;
                            const double drop = up.U[k] - up.U[k + 1] - up.U_err[k] - up.U_err[k + 1];
                            worst = std::max(worst, drop / umax);
                        }
                        add_check("up_profile", fx, p, verdict_of(worst <= tol),
                                  {{"worst_relative_drop", round12(worst)}, {"U_limit_zero", round12(up.U_limit_zero)},
                                   {"U_at_one", round12(up.U_at_one)}});
                    }
                    if (config.wants("effective_I")) {
                        const auto c = effective_check_I(up, tol);
                        add_check("effective_I", fx, p, verdict_of(c.pass), to_json(c));
                    }
                    if (config.wants("effective_II")) {
                        const auto c = effective_check_II(up, phi, nullptr, tol);
                        add_check("effective_II", fx, p, verdict_of(c.pass), to_json(c));
                    }
                }
                if (config.wants("asymptotics")) {
                    const auto ar = asymptotic_residuals(F, cr.cap_used);
                    nlohmann::json d = {{"res_u", round12(ar.res_u)}, {"res_grad", round12(ar.res_grad)}, {"samples", ar.samples}};
                    q["asymptotics"] = d;
                    add_check("asymptotics", fx, p, verdict_of(ar.res_u < 0.05 && ar.res_grad < 0.10), d);
                }
                if (config.wants("kato")) {
                    const double limit = spec.tag == ShapeTag::Ball ? 0.05 : 0.10;
                    const auto jet = lattice_jet(F);
                    nlohmann::json rows = nlohmann::json::array();
                    double worst = 0.0;
                    int used = 0;
                    for (const Vec3& x : kato_points(domain, config.h, R_out, config.seed, 12)) {
                        try {
                            const auto k = kato_residual(jet, x, p, 3, 0.0);
                            worst = std::max(worst, k.relative);
                            ++used;
                            nlohmann::json row = to_json(k);
                            row["x"] = {round12(x[0]), round12(x[1]), round12(x[2])};
                            rows.push_back(row);
                        } catch (const PreconditionError&) {
                        }
                    }
                    nlohmann::json d = {{"points", used}, {"worst_relative", round12(worst)}, {"limit", limit}, {"samples", rows}};
                    q["kato"] = d;
                    add_check("kato", fx, p, verdict_of(used >= 10 && worst < limit), d);
                }
                if (config.wants("moser")) {
                    if (spec.tag != ShapeTag::Ball) {
                        add_check("moser", fx, p, Verdict::Skipped, {{"reason", "closed form only for balls"}});
                    } else {
                        const auto rows = moser_imcf_demo(F, area, {0.0, 0.25, 0.5, 1.0});
                        double worst = 0.0;
                        for (const auto& r : rows)
                            if (std::isfinite(r.relative_error)) worst = std::max(worst, std::abs(r.relative_error));
                        q["moser"] = to_json(rows);
                        add_check("moser", fx, p, verdict_of(worst < 0.03), {{"worst_relative", round12(worst)}, {"rows", to_json(rows)}});
                    }
                }
                if (config.wants("lp_minkowski")) add_report(lp_minkowski_report(mesh, cr.cap_used, p, 3, {}, tol), spec, p);
                sink.write_json("quantities_" + cell + ".json", q);
            });
        }

        // Per-fixture geometry.
        if (config.wants("gauss_bonnet")) {
            guarded(fx + " gauss_bonnet", [&] {
                const auto gb = gauss_bonnet_check(mesh);
                const double target = 4.0 * 3.14159265358979323846 * gb.chi_combinatorial;
                const double allowed = gb.chi_combinatorial != 0 ? 0.005 * std::abs(target) : 0.5;
                add_check("gauss_bonnet", fx, 0.0, verdict_of(std::abs(gb.integral - target) <= allowed),
                          {{"integral", round12(gb.integral)},
                           {"target", round12(target)},
                           {"allowed", round12(allowed)},
                           {"chi", gb.chi_combinatorial},
                           {"chi_estimate", round12(gb.chi_estimate)}});
            });
        }
        if (config.wants("willmore_topology"))
            guarded(fx + " willmore_topology", [&] { add_report(willmore_topology_check(mesh, {}, tol), spec, 0.0); });
        if (config.wants("volumetric_minkowski")) {
            guarded(fx + " volumetric_minkowski", [&] {
                const double vol = domain_volume(domain, config.h);
                add_report(volumetric_minkowski_report(mesh, vol, 3, {}, tol), spec, 0.0);
            });
        }
        if (config.wants("hull")) {
            guarded(fx + " hull", [&] {
                const HullField& H = ensure_hull();
                const double rel = (H.perimeter_estimate - area) / area;
                add_check("hull", fx, 0.0, verdict_of(rel <= tol),
                          {{"perimeter", round12(H.perimeter_estimate)},
                           {"error", round12(st.hull_error)},
                           {"boundary_area", round12(area)},
                           {"relative_excess", round12(rel)}});
            });
        }
        if (config.wants("extended_minkowski")) {
            guarded(fx + " extended_minkowski", [&] {
                const HullField& H = ensure_hull();
                std::vector<double> values{H.perimeter_estimate}, errors{st.hull_error};
                nlohmann::json inputs = {{"hull_h", round12(config.hull_h)}, {"route", "tv"}};
                if (!config.extrapolation_p.empty()) {
                    SolveOptions base;
                    base.h = config.h;
                    base.R_out = R_out;
                    CapExtrapolation ce;
                    timed(fx + "/cap_extrapolation", [&] { ce = cap_limit_extrapolation(domain, config.extrapolation_p, base); });
                    sink.write_json("extrapolation_" + fx + ".json", to_json(ce));
                    values.push_back(ce.estimate);
                    errors.push_back(ce.error_bar);
                    inputs["route"] = "tv+extrapolation";
                }
                add_report(extended_minkowski_report(mesh, combine_hull_routes(values, errors), 3, inputs, tol), spec, 0.0);
            });
        }
        if (config.wants("outward_minimising_minkowski"))
            guarded(fx + " outward_minimising_minkowski",
                    [&] { add_report(outward_minimising_minkowski_report(mesh, gate(), 3, {}, tol), spec, 0.0); });
        if (config.wants("nearly_umbilical"))
            guarded(fx + " nearly_umbilical", [&] { add_report(nearly_umbilical_report(mesh, gate(), {}, tol), spec, 0.0); });
    }

    sink.write_json("reports.json", to_json(m.reports));
    {
        std::ostringstream csv;
        write_reports_csv(csv, m.reports);
        sink.write_text("reports.csv", csv.str());
    }
    {
        nlohmann::json checks = nlohmann::json::array();
        for (const auto& c : m.checks) checks.push_back(to_json(c));
        sink.write_json("checks.json", checks);
    }
    bool pass = m.errors.empty();
    for (const auto& r : m.reports) pass = pass && r.verdict != Verdict::Fail;
    for (const auto& c : m.checks) pass = pass && c.verdict != Verdict::Fail;
    m.pass = pass;
    if (!m.errors.empty()) {
        std::string text = "FAILED\n";
        for (const auto& e : m.errors) text += e + "\n";
        sink.write_text("FAILED", text);
    }
    m.artifacts = sink.artifacts;
    std::ofstream(sink.path("manifest.json")) << to_json(m).dump(1) << "\n";
    return m;
}

nlohmann::json to_json(const CheckResult& c) {
    return {{"check", c.check}, {"fixture", c.fixture}, {"p", round12(c.p)}, {"verdict", to_string(c.verdict)}, {"data", c.data}};
}

nlohmann::json to_json(const RunManifest& m) {
    nlohmann::json timings = nlohmann::json::array();
    for (const auto& [label, s] : m.timings) timings.push_back({{"step", label}, {"seconds", round12(s)}});
    nlohmann::json artifacts = nlohmann::json::array();
    for (const auto& a : m.artifacts) artifacts.push_back({{"path", a.path}, {"sha256", a.sha256}, {"bytes", a.bytes}});
    std::size_t fails = 0, skipped = 0;
    for (const auto& r : m.reports) {
        fails += r.verdict == Verdict::Fail;
        skipped += r.verdict == Verdict::Skipped;
    }
    for (const auto& c : m.checks) {
        fails += c.verdict == Verdict::Fail;
        skipped += c.verdict == Verdict::Skipped;
    }
    return {{"config", to_json(m.config)},
            {"config_text", config_to_text(m.config)},
            {"timings", timings},
            {"artifacts", artifacts},
            {"errors", m.errors},
            {"summary", {{"reports", m.reports.size()}, {"checks", m.checks.size()}, {"failed", fails}, {"skipped", skipped}}},
            {"overall", m.pass ? "PASS" : "FAIL"}};
}

namespace {

Verdict parse_verdict(const std::string& s) {
    if (s == "PASS") return Verdict::Pass;
    if (s == "SKIPPED") return Verdict::Skipped;
    return Verdict::Fail;
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw PreconditionError("cannot read " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw PreconditionError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

double as_number(const nlohmann::json& j) { return j.is_null() ? std::nan("") : j.get<double>(); }

void flatten(const nlohmann::json& j, const std::string& prefix, std::map<std::string, double>& out) {
    if (j.is_number()) {
        out[prefix] = j.get<double>();
    } else if (j.is_null()) {
        out[prefix] = std::nan("");
    } else if (j.is_object()) {
        for (const auto& [k, v] : j.items()) flatten(v, prefix + "/" + k, out);
    } else if (j.is_array()) {
        for (std::size_t k = 0; k < j.size(); ++k) flatten(j[k], prefix + "[" + std::to_string(k) + "]", out);
    }
}

std::map<std::string, double> flatten_run(const RunManifest& m) {
    std::map<std::string, double> out;
    for (const auto& r : m.reports) {
        const std::string key = r.inputs.value("fixture", std::string("?")) + "|" +
                                (r.inputs.contains("p") ? format_number(r.inputs["p"].get<double>()) : std::string("-")) + "|" + r.name;
        out[key + "/lhs"] = r.lhs;
        out[key + "/rhs"] = r.rhs;
        out[key + "/gap"] = r.gap;
        out[key + "/verdict"] = static_cast<double>(r.verdict);
        flatten(r.details, key + "/details", out);
    }
    for (const auto& c : m.checks) {
        const std::string key = c.fixture + "|" + (c.p > 0 ? format_number(c.p) : std::string("-")) + "|" + c.check;
        out[key + "/verdict"] = static_cast<double>(c.verdict);
        flatten(c.data, key + "/data", out);
    }
    return out;
}

}  // namespace

RunManifest load_manifest(const std::string& path) {
    fs::path p(path);
    if (fs::is_directory(p)) p /= "manifest.json";
    const nlohmann::json j = read_json(p);
    const fs::path dir = p.parent_path();
    RunManifest m;
    m.pass = j.value("overall", std::string("FAIL")) == "PASS";
    if (j.contains("config_text")) {
        try {
            m.config = parse_config(j["config_text"].get<std::string>());
        } catch (const PreconditionError&) {
        }
    }
    for (const auto& a : j.value("artifacts", nlohmann::json::array())) {
        ArtifactEntry e;
        e.path = a.at("path").get<std::string>();
        e.sha256 = a.at("sha256").get<std::string>();
        e.bytes = a.at("bytes").get<std::uintmax_t>();
        m.artifacts.push_back(e);
    }
    for (const auto& t : j.value("timings", nlohmann::json::array()))
        m.timings.emplace_back(t.at("step").get<std::string>(), t.at("seconds").get<double>());
    m.errors = j.value("errors", std::vector<std::string>{});
    for (const auto& r : read_json(dir / "reports.json")) {
        InequalityReport rep;
        rep.name = r.at("name").get<std::string>();
        rep.lhs = as_number(r.at("lhs"));
        rep.rhs = as_number(r.at("rhs"));
        rep.gap = as_number(r.at("gap"));
        rep.verdict = parse_verdict(r.at("verdict").get<std::string>());
        rep.tolerance = as_number(r.at("tolerance"));
        rep.inputs = r.at("inputs");
        rep.details = r.value("details", nlohmann::json::object());
        m.reports.push_back(rep);
    }
    for (const auto& c : read_json(dir / "checks.json")) {
        CheckResult cr;
        cr.check = c.at("check").get<std::string>();
        cr.fixture = c.at("fixture").get<std::string>();
        cr.p = as_number(c.at("p"));
        cr.verdict = parse_verdict(c.at("verdict").get<std::string>());
        cr.data = c.at("data");
        m.checks.push_back(cr);
    }
    return m;
}

RunDiff compare_runs(const RunManifest& a, const RunManifest& b, double rel_tol) {
    RunDiff d;
    const auto fa = flatten_run(a);
    const auto fb = flatten_run(b);
    auto head = [](const std::string& key) { return key.substr(0, key.find('/')); };
    std::set<std::string> heads_a, heads_b;
    for (const auto& [k, v] : fa) heads_a.insert(head(k));
    for (const auto& [k, v] : fb) heads_b.insert(head(k));
    for (const auto& h : heads_a)
        if (!heads_b.count(h)) d.structure.push_back("only in a: " + h);
    for (const auto& h : heads_b)
        if (!heads_a.count(h)) d.structure.push_back("only in b: " + h);
    d.structural_mismatch = !d.structure.empty();
    for (const auto& [k, va] : fa) {
        const auto it = fb.find(k);
        if (it == fb.end()) continue;
        const double vb = it->second;
        if (std::isnan(va) && std::isnan(vb)) continue;
        const double denom = std::max(std::abs(va), std::abs(vb));
        const double rel = denom > 0 ? std::abs(va - vb) / denom : 0.0;
        if (std::isnan(va) != std::isnan(vb) || rel > rel_tol) d.drift.push_back({k, va, vb, std::isnan(rel) ? 1.0 : rel});
    }
    return d;
}

nlohmann::json to_json(const RunDiff& d) {
    nlohmann::json drift = nlohmann::json::array();
    for (const auto& e : d.drift)
        drift.push_back({{"key", e.key}, {"a", round12(e.a)}, {"b", round12(e.b)}, {"relative", round12(e.relative)}});
    return {{"structural_mismatch", d.structural_mismatch}, {"structure", d.structure}, {"drift", drift}, {"empty", d.empty()}};
}

}  // namespace pcaplab
