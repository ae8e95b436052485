#include "qfg/experiment.hpp"

#include <json.hpp>
#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "qfg/circle_exact.hpp"
#include "qfg/filtering.hpp"
#include "qfg/games.hpp"
#include "qfg/pde.hpp"
#include "qfg/rng.hpp"
#include "qfg/scheme_analysis.hpp"

namespace qfg::cli {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// config parsing
// ---------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

ConfigMap ConfigMap::parse_text(const std::string& text) {
    ConfigMap out;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("unterminated section header", line_no);
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected 'key = value'", line_no);
        std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("empty key or value", line_no);
        if (!section.empty()) key = section + "." + key;
        if (out.entries_.count(key))
            throw ConfigError("duplicate key '" + key + "'", line_no);
        out.entries_[key] = Entry{value, line_no};
    }
    return out;
}

ConfigMap ConfigMap::parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_text(buffer.str());
}

void ConfigMap::set(const std::string& key, const std::string& value) {
    entries_[key] = Entry{value, 0};
}

bool ConfigMap::has(const std::string& key) const { return entries_.count(key) > 0; }

const ConfigMap::Entry& ConfigMap::at(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("missing config key '" + key + "'");
    return it->second;
}

namespace {

bool parse_double(const std::string& raw, double* out) {
    try {
        std::size_t used = 0;
        *out = std::stod(raw, &used);
        return used == raw.size();
    } catch (...) {
        return false;
    }
}

bool parse_list(const std::string& raw, std::vector<double>* out) {
    std::string body = raw;
    if (!body.empty() && body.front() == '[') {
        if (body.back() != ']') return false;
        body = body.substr(1, body.size() - 2);
    }
    out->clear();
    std::istringstream in(body);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) return false;
        double v;
        if (!parse_double(item, &v)) return false;
        out->push_back(v);
    }
    return !out->empty();
}

}  // namespace

void ConfigMap::finalize(const Schema& schema) {
    for (const auto& [key, entry] : entries_) {
        const FieldSpec* spec = nullptr;
        for (const auto& field : schema)
            if (field.key == key) {
                spec = &field;
                break;
            }
        if (!spec) throw ConfigError("unknown config key '" + key + "'", entry.line);
        double d;
        std::vector<double> list;
        switch (spec->kind) {
            case FieldKind::Double:
                if (!parse_double(entry.raw, &d))
                    throw ConfigError("key '" + key + "' expects a number", entry.line);
                break;
            case FieldKind::Int:
                if (!parse_double(entry.raw, &d) || d != std::floor(d))
                    throw ConfigError("key '" + key + "' expects an integer", entry.line);
                break;
            case FieldKind::Bool:
                if (entry.raw != "true" && entry.raw != "false")
                    throw ConfigError("key '" + key + "' expects true or false", entry.line);
                break;
            case FieldKind::List:
                if (!parse_list(entry.raw, &list))
                    throw ConfigError("key '" + key + "' expects a list of numbers", entry.line);
                break;
            case FieldKind::String:
                break;
        }
    }
    for (const auto& field : schema)
        if (!entries_.count(field.key) && !field.preset.empty())
            entries_[field.key] = Entry{field.preset, 0};
}

double ConfigMap::get_double(const std::string& key) const {
    double v;
    const Entry& e = at(key);
    if (!parse_double(e.raw, &v))
        throw ConfigError("key '" + key + "' expects a number", e.line);
    return v;
}

int ConfigMap::get_int(const std::string& key) const {
    return static_cast<int>(get_double(key));
}

bool ConfigMap::get_bool(const std::string& key) const { return at(key).raw == "true"; }

std::string ConfigMap::get_string(const std::string& key) const { return at(key).raw; }

std::vector<double> ConfigMap::get_list(const std::string& key) const {
    std::vector<double> v;
    const Entry& e = at(key);
    if (!parse_list(e.raw, &v))
        throw ConfigError("key '" + key + "' expects a list of numbers", e.line);
    return v;
}

std::string ConfigMap::canonical_text() const {
    std::ostringstream out;
    for (const auto& [key, entry] : entries_) out << key << " = " << entry.raw << "\n";
    return out.str();
}

std::uint64_t fnv1a_hash(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hash_hex(const std::string& text) {
    std::ostringstream out;
    out << std::hex << std::setfill('0') << std::setw(16) << fnv1a_hash(text);
    return out.str();
}

// ---------------------------------------------------------------------------
// schemas
// ---------------------------------------------------------------------------

const Schema& simulate_schema() {
    static const Schema schema = {
        {"scheme.kind", FieldKind::String, "pauli", "pauli | gellmann | torus | euclidean"},
        {"scheme.dim", FieldKind::Int, "2", "Hilbert dimension (gellmann/euclidean schemes)"},
        {"scheme.rates", FieldKind::List, "1.0", "torus coupling rates r_k"},
        {"hamiltonian.h0_diag", FieldKind::List, "", "diagonal entries of H0"},
        {"hamiltonian.h0_pauli", FieldKind::List, "", "qubit H0 = cx sx + cy sy + cz sz"},
        {"hamiltonian.h1_diag", FieldKind::List, "", "diagonal entries of H1"},
        {"hamiltonian.h2_diag", FieldKind::List, "", "diagonal entries of H2"},
        {"control.u", FieldKind::Double, "0", "constant control u during the run"},
        {"control.v", FieldKind::Double, "0", "constant control v during the run"},
        {"start.re", FieldKind::List, "0.0", "Re of the chart start point"},
        {"start.im", FieldKind::List, "0.0", "Im of the chart start point"},
        {"run.dt", FieldKind::Double, "1e-3", "integrator step"},
        {"run.horizon", FieldKind::Double, "1.0", "time horizon"},
        {"run.seed", FieldKind::Int, "0", "random seed"},
        {"run.noise", FieldKind::String, "innovation", "driving noise: output | innovation"},
        {"run.noise_scale", FieldKind::Double, "1.0", "0 disables noise (ODE mode)"},
    };
    return schema;
}

const Schema& analyze_scheme_schema() {
    static const Schema schema = {
        {"scheme.kind", FieldKind::String, "pauli", "pauli | gellmann | torus | euclidean"},
        {"scheme.dim", FieldKind::Int, "2", "Hilbert dimension where applicable"},
        {"scheme.rates", FieldKind::List, "1.0", "torus coupling rates"},
        {"analysis.points", FieldKind::Int, "100", "random chart points to test"},
        {"analysis.radius", FieldKind::Double, "10.0", "chart radius of the sweep"},
        {"analysis.seed", FieldKind::Int, "1", "seed of the point sweep"},
    };
    return schema;
}

const Schema& solve_hjb_schema() {
    static const Schema schema = {
        {"problem.manifold", FieldKind::String, "circle", "circle | torus2 | sphere2"},
        {"problem.kappa", FieldKind::Double, "0.5", "diffusion scale"},
        {"problem.horizon", FieldKind::Double, "1.0", "time horizon"},
        {"problem.alpha", FieldKind::Double, "1.0", "coefficient of |grad S|"},
        {"problem.delta", FieldKind::Double, "0", "discount rate (0 = none)"},
        {"problem.cost_amplitude", FieldKind::Double, "1.0", "running cost a cos(c1)"},
        {"problem.terminal_amplitude", FieldKind::Double, "0", "terminal data a cos(c1)"},
        {"grid.resolution", FieldKind::Int, "256", "circle/torus nodes per axis"},
        {"grid.lmax", FieldKind::Int, "32", "spherical-harmonic cutoff"},
        {"solver.method", FieldKind::String, "mild", "mild | fd"},
        {"solver.dt", FieldKind::Double, "1e-3", "time step (fd: 0 = auto)"},
        {"solver.tolerance", FieldKind::Double, "1e-9", "fixed-point tolerance"},
        {"solver.max_iterations", FieldKind::Int, "200", "fixed-point sweep limit"},
        {"output.slice_stride", FieldKind::Int, "0", "CSV slice stride (0 = first/last only)"},
    };
    return schema;
}

const Schema& exact_circle_schema() {
    static const Schema schema = {
        {"alpha", FieldKind::Double, "1.0", "drift advantage"},
        {"delta", FieldKind::Double, "0", "discount rate (0 = stationary problem only)"},
        {"nodes", FieldKind::Int, "1024", "profile resolution"},
    };
    return schema;
}

const Schema& policy_eval_schema() {
    static const Schema schema = {
        {"game.scheme", FieldKind::String, "torus", "torus | pauli"},
        {"game.rates", FieldKind::List, "1.0", "torus coupling rates"},
        {"game.u_bound", FieldKind::Double, "1.5", "player I control bound U"},
        {"game.v_bound", FieldKind::Double, "0.5", "player II control bound V"},
        {"game.horizon", FieldKind::Double, "1.0", "game horizon"},
        {"hamiltonian.h0_diag", FieldKind::List, "0, 0", "diagonal H0 (torus games)"},
        {"hamiltonian.h1_diag", FieldKind::List, "0.5, -0.5", "diagonal H1"},
        {"hamiltonian.h2_diag", FieldKind::List, "0.5, -0.5", "diagonal H2"},
        {"cost.j_pauli", FieldKind::List, "1, 0, 0", "J = cx sx + cy sy + cz sz (qubit)"},
        {"cost.f_pauli", FieldKind::List, "0, 0, 0", "F likewise"},
        {"start.angles", FieldKind::List, "1.5707963267948966", "start angles"},
        {"start.moduli", FieldKind::List, "1.0", "conserved |w_k|"},
        {"grid.resolution", FieldKind::Int, "256", "reduction grid nodes"},
        {"pde.dt", FieldKind::Double, "1e-3", "solver time step"},
        {"mc.n_paths", FieldKind::Int, "10000", "Monte Carlo paths"},
        {"mc.dt", FieldKind::Double, "1e-3", "Monte Carlo step"},
        {"mc.seed", FieldKind::Int, "0", "Monte Carlo seed"},
    };
    return schema;
}

const Schema& two_atom_schema() {
    static const Schema schema = {
        {"atoms.h1", FieldKind::List, "1, 0, 0, -1", "player I Hamiltonian [a, re, im, c]"},
        {"atoms.h2", FieldKind::List, "1, 0, 0, -1", "player II Hamiltonian [a, re, im, c]"},
        {"atoms.interaction", FieldKind::String, "exchange", "exchange | none"},
        {"atoms.interaction_strength", FieldKind::Double, "1.0", "coupling strength"},
        {"control.u", FieldKind::Double, "0", "constant control u"},
        {"control.v", FieldKind::Double, "0", "constant control v"},
        {"start.re", FieldKind::List, "0.2, -0.1, 0.1", "Re of (w01, w10, w11)"},
        {"start.im", FieldKind::List, "0.0, 0.3, -0.2", "Im of (w01, w10, w11)"},
        {"run.dt", FieldKind::Double, "1e-3", "integrator step"},
        {"run.horizon", FieldKind::Double, "1.0", "time horizon"},
        {"run.seed", FieldKind::Int, "0", "random seed"},
    };
    return schema;
}

std::string describe(const Schema& schema) {
    std::ostringstream out;
    for (const auto& field : schema) {
        out << "  " << field.key;
        if (!field.preset.empty()) out << " (default " << field.preset << ")";
        out << ": " << field.help << "\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// shared output helpers
// ---------------------------------------------------------------------------

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

void write_json(const std::filesystem::path& path, const json& j) {
    write_text(path, j.dump(2) + "\n");
}

void write_resolved(const ConfigMap& config, const std::filesystem::path& out_dir) {
    write_text(out_dir / "resolved.cfg", config.canonical_text());
}

json summary_header(const char* subcommand, const ConfigMap& config) {
    json j;
    j["schema_version"] = 1;
    j["subcommand"] = subcommand;
    j["spec_hash"] = hash_hex(std::string(subcommand) + "\n" + config.canonical_text());
    return j;
}

std::string fmt(double v) {
    std::ostringstream out;
    out << std::setprecision(17) << v;
    return out.str();
}

DetectionScheme scheme_from_config(const ConfigMap& config, const std::string& prefix) {
    const std::string kind = config.get_string(prefix + ".kind");
    if (kind == "pauli") return pauli_scheme();
    if (kind == "gellmann") return gell_mann_scheme(config.get_int(prefix + ".dim"));
    if (kind == "euclidean") return euclidean_scheme(config.get_int(prefix + ".dim") - 1);
    if (kind == "torus") {
        const auto rates = config.get_list(prefix + ".rates");
        RVector r(rates.size());
        for (std::size_t k = 0; k < rates.size(); ++k) r(k) = rates[k];
        return torus_diagonal_scheme(r);
    }
    throw ConfigError("unknown scheme kind '" + kind + "'");
}

Matrix pauli_combination(const std::vector<double>& c) {
    if (c.size() != 3) throw ConfigError("pauli coefficient lists need 3 entries");
    return c[0] * pauli_x() + c[1] * pauli_y() + c[2] * pauli_z();
}

Matrix diag_matrix(const std::vector<double>& entries) {
    Matrix m = Matrix::Zero(entries.size(), entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k) m(k, k) = entries[k];
    return m;
}

Matrix hamiltonian_part(const ConfigMap& config, const std::string& key, int dim) {
    if (config.has(key + "_diag")) {
        const Matrix m = diag_matrix(config.get_list(key + "_diag"));
        if (m.rows() != dim) throw ConfigError("'" + key + "_diag' has wrong length");
        return m;
    }
    if (config.has(key + "_pauli")) {
        if (dim != 2) throw ConfigError("'" + key + "_pauli' needs a qubit scheme");
        return pauli_combination(config.get_list(key + "_pauli"));
    }
    return Matrix::Zero(dim, dim);
}

CVector start_from_config(const ConfigMap& config, int n) {
    const auto re = config.get_list("start.re");
    const auto im = config.get_list("start.im");
    if (static_cast<int>(re.size()) != n || static_cast<int>(im.size()) != n)
        throw ConfigError("start.re/start.im need " + std::to_string(n) + " entries");
    CVector w(n);
    for (int k = 0; k < n; ++k) w(k) = Complex(re[k], im[k]);
    return w;
}

}  // namespace

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

int run_simulate(ConfigMap config, const std::filesystem::path& out_dir, int /*threads*/) {
    config.finalize(simulate_schema());
    std::filesystem::create_directories(out_dir);

    const DetectionScheme scheme = scheme_from_config(config, "scheme");
    const int dim = scheme.dim();
    ControlledHamiltonian ham(hamiltonian_part(config, "hamiltonian.h0", dim),
                              hamiltonian_part(config, "hamiltonian.h1", dim),
                              hamiltonian_part(config, "hamiltonian.h2", dim));
    TrajectoryConfig traj_config;
    traj_config.dt = config.get_double("run.dt");
    traj_config.horizon = config.get_double("run.horizon");
    traj_config.seed = static_cast<std::uint64_t>(config.get_int("run.seed"));
    traj_config.noise_scale = config.get_double("run.noise_scale");
    const std::string noise = config.get_string("run.noise");
    if (noise != "output" && noise != "innovation")
        throw ConfigError("run.noise must be output or innovation");
    traj_config.noise_kind = noise == "output" ? NoiseKind::Output : NoiseKind::Innovation;

    const double u = config.get_double("control.u");
    const double v = config.get_double("control.v");
    const CVector start = start_from_config(config, dim - 1);

    const Trajectory traj = simulate_trajectory(
        scheme, ham,
        [u, v](double, const SchemeState&) { return std::make_pair(u, v); }, start, traj_config);

    // trajectory CSV: t, state coordinates, channel increments, controls
    const bool torus = scheme.kind() == SchemeKind::TorusDiagonal;
    std::ostringstream csv;
    csv << "t";
    if (torus)
        for (int k = 1; k < dim; ++k) csv << ",phi_" << k;
    else
        for (int k = 1; k < dim; ++k) csv << ",re_w" << k << ",im_w" << k;
    for (const std::string& label : scheme.labels()) csv << ",dY_" << label;
    csv << ",u,v\n";
    for (std::size_t row = 0; row < traj.times.size(); ++row) {
        csv << fmt(traj.times[row]);
        if (torus)
            for (int k = 0; k < dim - 1; ++k) csv << "," << fmt(traj.angles[row](k));
        else
            for (int k = 0; k < dim - 1; ++k)
                csv << "," << fmt(traj.states[row](k).real()) << ","
                    << fmt(traj.states[row](k).imag());
        if (row < traj.increments.size()) {
            for (int j = 0; j < scheme.channels(); ++j) csv << "," << fmt(traj.increments[row](j));
            csv << "," << fmt(traj.u[row]) << "," << fmt(traj.v[row]);
        } else {
            for (int j = 0; j < scheme.channels() + 2; ++j) csv << ",";
        }
        csv << "\n";
    }
    write_text(out_dir / "trajectory.csv", csv.str());

    json summary = summary_header("simulate", config);
    summary["scheme"] = to_string(scheme.kind());
    summary["steps"] = traj.steps();
    summary["truncated"] = traj.truncated;
    if (traj.truncated) summary["exit_time"] = traj.exit_time;
    json final_state = json::array();
    for (int k = 0; k < dim - 1; ++k)
        final_state.push_back({{"re", traj.states.back()(k).real()},
                               {"im", traj.states.back()(k).imag()}});
    summary["final_state"] = final_state;
    write_json(out_dir / "summary.json", summary);
    write_resolved(config, out_dir);
    return 0;
}

// ---------------------------------------------------------------------------
// analyze-scheme
// ---------------------------------------------------------------------------

int run_analyze_scheme(ConfigMap config, const std::filesystem::path& out_dir, int /*threads*/) {
    config.finalize(analyze_scheme_schema());
    std::filesystem::create_directories(out_dir);

    const DetectionScheme scheme = scheme_from_config(config, "scheme");
    const int n = scheme.dim() - 1;
    const int points = config.get_int("analysis.points");
    const double radius = config.get_double("analysis.radius");
    RandomStream rng(static_cast<std::uint64_t>(config.get_int("analysis.seed")));
    const Matrix h0 = Matrix::Zero(scheme.dim(), scheme.dim());

    double max_drift = 0.0, max_variance = 0.0, max_reference_gap = 0.0;
    bool innovation_invariant = true;
    for (int rep = 0; rep < points; ++rep) {
        CVector w(n);
        for (int k = 0; k < n; ++k) {
            const double r = radius * std::sqrt(rng.uniform());
            w(k) = std::polar(r / std::sqrt(double(n)), 2 * M_PI * rng.uniform());
        }
        const ProjectiveState state{w};

        switch (scheme.kind()) {
            case SchemeKind::PauliSphere:
                max_drift = std::max(max_drift, sphere_generator_residual(w(0)));
                max_variance = max_drift;
                break;
            case SchemeKind::GellMannProjective:
                if (scheme.dim() == 3) {
                    Eigen::Vector2cd w2;
                    w2 << w(0), w(1);
                    const auto report = projective_generator_report(w2);
                    max_drift = std::max(max_drift, report.drift_residual);
                    max_variance = std::max(max_variance, report.holomorphic_residual);
                    max_reference_gap = std::max(max_reference_gap, report.discrepancy);
                    break;
                }
                [[fallthrough]];
            default: {
                const auto local = local_coefficients(scheme, h0, state, NoiseKind::Output);
                // reference: OU drift n w and unit quadratic variation for the
                // euclidean column scheme; plain coefficient report otherwise
                if (scheme.kind() == SchemeKind::EuclideanColumn) {
                    RVector ou(2 * n);
                    for (int k = 0; k < n; ++k) {
                        ou(2 * k) = n * w(k).real();
                        ou(2 * k + 1) = n * w(k).imag();
                    }
                    max_drift = std::max(max_drift, (local.drift - ou).cwiseAbs().maxCoeff());
                    max_variance = std::max(
                        max_variance,
                        (local.quadratic_variation - RMatrix::Identity(2 * n, 2 * n))
                            .cwiseAbs()
                            .maxCoeff());
                    // displayed reference carries twice the SDE-derived variance
                    max_reference_gap = std::max(
                        max_reference_gap,
                        (local.quadratic_variation - 2.0 * RMatrix::Identity(2 * n, 2 * n))
                            .cwiseAbs()
                            .maxCoeff());
                } else {
                    max_drift = std::max(max_drift, local.drift.cwiseAbs().maxCoeff());
                }
                break;
            }
        }
        if (!innovation_invariance_check(scheme, h0, state))
            innovation_invariant = false;
    }

    json summary = summary_header("analyze-scheme", config);
    summary["scheme"] = to_string(scheme.kind());
    summary["points_tested"] = points;
    summary["max_drift_residual"] = max_drift;
    summary["max_variance_residual"] = max_variance;
    summary["innovation_invariant"] = innovation_invariant;
    if (scheme.kind() == SchemeKind::GellMannProjective ||
        scheme.kind() == SchemeKind::EuclideanColumn)
        summary["reference_discrepancy"] = max_reference_gap;
    if (scheme.dim() == 2 && scheme.channels() == 3) {
        const auto iso = check_isothermal(scheme.couplings());
        summary["isothermal"] = {{"verdict", iso.is_isothermal},
                                 {"scale", iso.scale},
                                 {"first_order_cancellation", iso.first_order_cancellation}};
    }
    write_json(out_dir / "report.json", summary);
    write_resolved(config, out_dir);
    return 0;
}

// ---------------------------------------------------------------------------
// solve-hjb
// ---------------------------------------------------------------------------

int run_solve_hjb(ConfigMap config, const std::filesystem::path& out_dir, int /*threads*/) {
    config.finalize(solve_hjb_schema());
    std::filesystem::create_directories(out_dir);

    const std::string manifold = config.get_string("problem.manifold");
    const double kappa = config.get_double("problem.kappa");
    ManifoldGrid grid = ManifoldGrid::circle(4, 1.0);
    if (manifold == "circle")
        grid = ManifoldGrid::circle(config.get_int("grid.resolution"), kappa);
    else if (manifold == "torus2")
        grid = ManifoldGrid::torus(config.get_int("grid.resolution"),
                                   config.get_int("grid.resolution"), kappa);
    else if (manifold == "sphere2")
        grid = ManifoldGrid::sphere(config.get_int("grid.lmax"), kappa);
    else
        throw ConfigError("problem.manifold must be circle, torus2 or sphere2");

    const double alpha = config.get_double("problem.alpha");
    const double delta = config.get_double("problem.delta");
    const double cost_amp = config.get_double("problem.cost_amplitude");
    const double term_amp = config.get_double("problem.terminal_amplitude");
    const double horizon = config.get_double("problem.horizon");

    HamiltonianField field{
        [alpha, delta, cost_amp](const ManifoldPoint& p, double value, const Covector& g) {
            return alpha * g.metric_norm + cost_amp * std::cos(p.c1) - delta * value;
        },
        std::abs(alpha), std::abs(delta)};
    GridFunction terminal = make_grid_function(
        grid, [term_amp](const ManifoldPoint& p) { return term_amp * std::cos(p.c1); });

    const std::string method = config.get_string("solver.method");
    ValueFunction vf;
    if (method == "mild") {
        SolverConfig sc;
        sc.dt = config.get_double("solver.dt");
        sc.tolerance = config.get_double("solver.tolerance");
        sc.max_iterations = config.get_int("solver.max_iterations");
        vf = mild_solve(grid, terminal, field, horizon, sc);
    } else if (method == "fd") {
        FdConfig fc;
        fc.dt = config.get_double("solver.dt");
        vf = fd_solve(grid, terminal, field, horizon, fc);
    } else {
        throw ConfigError("solver.method must be mild or fd");
    }

    // value slices: node coordinates plus value, first/last or strided
    std::vector<int> slice_ids;
    const int stride = config.get_int("output.slice_stride");
    if (stride > 0)
        for (int i = 0; i < vf.time_count(); i += stride) slice_ids.push_back(i);
    if (slice_ids.empty() || slice_ids.back() != vf.time_count() - 1)
        slice_ids.push_back(vf.time_count() - 1);
    if (stride <= 0) slice_ids.insert(slice_ids.begin(), 0);

    std::ostringstream csv;
    csv << "t,c1,c2,value\n";
    for (int slice : slice_ids) {
        const double t = slice * vf.dt;
        for (int idx = 0; idx < grid.node_count(); ++idx) {
            const ManifoldPoint p = grid_point(grid, idx);
            csv << fmt(t) << "," << fmt(p.c1) << "," << fmt(p.c2) << ","
                << fmt(vf.slices[slice].values(idx)) << "\n";
        }
    }
    write_text(out_dir / "value.csv", csv.str());

    json summary = summary_header("solve-hjb", config);
    summary["manifold"] = manifold;
    summary["method"] = method;
    summary["time_steps"] = vf.time_count() - 1;
    summary["iterations"] = vf.iterations;
    summary["residuals"] = vf.residuals;
    summary["value_range"] = {{"min", vf.slices.front().values.minCoeff()},
                              {"max", vf.slices.front().values.maxCoeff()}};
    write_json(out_dir / "convergence.json", summary);
    write_resolved(config, out_dir);
    return 0;
}

// ---------------------------------------------------------------------------
// exact-circle
// ---------------------------------------------------------------------------

int run_exact_circle(ConfigMap config, const std::filesystem::path& out_dir, int /*threads*/) {
    config.finalize(exact_circle_schema());
    std::filesystem::create_directories(out_dir);

    const double alpha = config.get_double("alpha");
    const double delta = config.get_double("delta");
    const int nodes = config.get_int("nodes");

    const auto stationary = stationary_solve_circle(alpha, nodes);

    json summary = summary_header("exact-circle", config);
    summary["alpha"] = alpha;
    summary["lambda"] = circle_game_lambda(alpha);
    summary["lambda_numeric"] = stationary.lambda;
    summary["boundary_residual"] = stationary.boundary_residual;

    std::ostringstream csv;
    csv << "phi,stationary_profile";
    const bool discounted = delta > 0.0;
    DiscountedCircleSolution disc;
    if (discounted) {
        disc = discounted_solve_circle(alpha, delta, nodes);
        csv << ",discounted_value";
        double residual = 0.0;
        for (int k = 1; k < nodes; ++k) {
            const double phi = M_PI * k / nodes;
            residual = std::max(residual, std::abs(0.5 * disc.second_derivative_at(phi) -
                                                   alpha * disc.derivative_at(phi) +
                                                   std::cos(phi) - delta * disc.value_at(phi)));
        }
        summary["discounted"] = {{"delta", delta},
                                 {"a1", disc.a1},
                                 {"a2", disc.a2},
                                 {"a", disc.a},
                                 {"b", disc.b},
                                 {"coef_a", disc.coef_a},
                                 {"coef_b", disc.coef_b},
                                 {"plugback_residual", residual}};
    }
    csv << "\n";
    for (int k = 0; k < nodes; ++k) {
        const double phi = 2.0 * M_PI * k / nodes;
        csv << fmt(phi) << "," << fmt(stationary.profile.values(k));
        if (discounted) csv << "," << fmt(disc.profile.values(k));
        csv << "\n";
    }
    write_text(out_dir / "profile.csv", csv.str());
    write_json(out_dir / "summary.json", summary);
    write_resolved(config, out_dir);
    return 0;
}

// ---------------------------------------------------------------------------
// policy-eval
// ---------------------------------------------------------------------------

int run_policy_eval(ConfigMap config, const std::filesystem::path& out_dir, int threads) {
    config.finalize(policy_eval_schema());
    std::filesystem::create_directories(out_dir);

    const std::string scheme_kind = config.get_string("game.scheme");
    DetectionScheme scheme = pauli_scheme();
    if (scheme_kind == "torus") {
        const auto rates = config.get_list("game.rates");
        RVector r(rates.size());
        for (std::size_t k = 0; k < rates.size(); ++k) r(k) = rates[k];
        scheme = torus_diagonal_scheme(r);
    } else if (scheme_kind != "pauli") {
        throw ConfigError("game.scheme must be torus or pauli");
    }
    const int dim = scheme.dim();

    Matrix j = Matrix::Zero(dim, dim), f = Matrix::Zero(dim, dim);
    if (dim == 2) {
        j = pauli_combination(config.get_list("cost.j_pauli"));
        f = pauli_combination(config.get_list("cost.f_pauli"));
    } else {
        throw ConfigError("policy-eval currently drives qubit games");
    }

    ControlledHamiltonian ham(hamiltonian_part(config, "hamiltonian.h0", dim),
                              hamiltonian_part(config, "hamiltonian.h1", dim),
                              hamiltonian_part(config, "hamiltonian.h2", dim));

    const auto angles = config.get_list("start.angles");
    const auto moduli = config.get_list("start.moduli");
    if (angles.size() != moduli.size() || static_cast<int>(angles.size()) != dim - 1)
        throw ConfigError("start.angles/start.moduli need dim-1 entries");
    CVector start(dim - 1);
    for (int k = 0; k < dim - 1; ++k) start(k) = std::polar(moduli[k], angles[k]);

    GameSpec spec(scheme, ham, config.get_double("game.u_bound"),
                  config.get_double("game.v_bound"), j, f, config.get_double("game.horizon"),
                  start);
    GameSolverConfig solver;
    solver.resolution = config.get_int("grid.resolution");
    solver.pde.dt = config.get_double("pde.dt");
    const auto solution = solve_zero_sum(spec, solver);

    McConfig mc;
    mc.n_paths = config.get_int("mc.n_paths");
    mc.dt = config.get_double("mc.dt");
    mc.seed = static_cast<std::uint64_t>(config.get_int("mc.seed"));
    mc.threads = threads;
    const auto eval = evaluate_policy_mc(spec, solution.policy, mc);

    json summary = summary_header("policy-eval", config);
    summary["value"] = solution.value_at_start;
    if (scheme.kind() == SchemeKind::TorusDiagonal && dim == 2) {
        // ergodic reference of the reduced equation (kappa = r^2/2 puts the
        // stationary reduction at twice the effective advantage)
        const double d1 = ham.h1(0, 0).real() - ham.h1(1, 1).real();
        const double d2 = ham.h2(0, 0).real() - ham.h2(1, 1).real();
        const double alpha_eff =
            spec.u_bound * std::abs(d1) - spec.v_bound * std::abs(d2);
        const double r = scheme.torus_rates()(0);
        summary["lambda"] = circle_game_lambda(2.0 * alpha_eff / (r * r));
    } else {
        summary["lambda"] = nullptr;
    }
    summary["mc_mean"] = eval.mean;
    summary["mc_stderr"] = eval.std_error;
    summary["chart_exit_fraction"] = eval.chart_exit_fraction;
    summary["flagged"] = eval.flagged;
    summary["pde_iterations"] = solution.value.iterations;
    write_json(out_dir / "summary.json", summary);
    write_resolved(config, out_dir);
    return 0;
}

// ---------------------------------------------------------------------------
// two-atom
// ---------------------------------------------------------------------------

int run_two_atom(ConfigMap config, const std::filesystem::path& out_dir, int /*threads*/) {
    config.finalize(two_atom_schema());
    std::filesystem::create_directories(out_dir);

    auto hermitian2 = [](const std::vector<double>& p) {
        if (p.size() != 4) throw ConfigError("atom Hamiltonians need 4 entries [a, re, im, c]");
        Matrix m(2, 2);
        m(0, 0) = p[0];
        m(0, 1) = Complex(p[1], p[2]);
        m(1, 0) = Complex(p[1], -p[2]);
        m(1, 1) = p[3];
        return m;
    };
    const Matrix h1 = hermitian2(config.get_list("atoms.h1"));
    const Matrix h2 = hermitian2(config.get_list("atoms.h2"));

    Matrix interaction = Matrix::Zero(4, 4);
    const std::string kind = config.get_string("atoms.interaction");
    if (kind == "exchange") {
        // photon-exchange coupling between the two qubits
        const double g = config.get_double("atoms.interaction_strength");
        interaction(1, 2) = g;
        interaction(2, 1) = g;
    } else if (kind != "none") {
        throw ConfigError("atoms.interaction must be exchange or none");
    }

    const Matrix zero4 = Matrix::Zero(4, 4);
    TwoAtomSpec spec(2, h1, h2, interaction, std::abs(config.get_double("control.u")),
                     std::abs(config.get_double("control.v")), zero4, zero4, zero4, zero4,
                     config.get_double("run.horizon"));
    const double u = config.get_double("control.u");
    const double v = config.get_double("control.v");

    const CVector start = start_from_config(config, 3);
    const CVector drift0 = two_atom_drift(spec, u, v, start);

    // combined-space simulation under the full generalized Pauli scheme
    auto scheme = gell_mann_scheme(4);
    const Matrix eye = Matrix::Identity(2, 2);
    ControlledHamiltonian ham(interaction,
                              Eigen::kroneckerProduct(h1, eye).eval(),
                              Eigen::kroneckerProduct(eye, h2.transpose()).eval());
    TrajectoryConfig tc;
    tc.dt = config.get_double("run.dt");
    tc.horizon = config.get_double("run.horizon");
    tc.seed = static_cast<std::uint64_t>(config.get_int("run.seed"));
    const Trajectory traj = simulate_trajectory(
        scheme, ham, [u, v](double, const SchemeState&) { return std::make_pair(u, v); }, start,
        tc);

    std::ostringstream csv;
    csv << "t,re_w01,im_w01,re_w10,im_w10,re_w11,im_w11\n";
    for (std::size_t row = 0; row < traj.times.size(); ++row) {
        csv << fmt(traj.times[row]);
        for (int k = 0; k < 3; ++k)
            csv << "," << fmt(traj.states[row](k).real()) << ","
                << fmt(traj.states[row](k).imag());
        csv << "\n";
    }
    write_text(out_dir / "trajectory.csv", csv.str());

    json summary = summary_header("two-atom", config);
    summary["steps"] = traj.steps();
    summary["truncated"] = traj.truncated;
    json drift = json::array();
    for (int k = 0; k < 3; ++k)
        drift.push_back({{"re", drift0(k).real()}, {"im", drift0(k).imag()}});
    summary["start_drift"] = drift;
    json final_state = json::array();
    for (int k = 0; k < 3; ++k)
        final_state.push_back(
            {{"re", traj.states.back()(k).real()}, {"im", traj.states.back()(k).imag()}});
    summary["final_state"] = final_state;
    write_json(out_dir / "summary.json", summary);
    write_resolved(config, out_dir);
    return 0;
}

}  // namespace qfg::cli
