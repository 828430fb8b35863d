// kerrflow command-line driver: one subcommand per data product.

#include "kerrflow/errors.hpp"
#include "kerrflow/io.hpp"
#include "kerrflow/parallel.hpp"
#include "kerrflow/semiclassics.hpp"
#include "kerrflow/spectra.hpp"
#include "kerrflow/trajectories.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <new>
#include <set>
#include <sstream>

#ifndef KERRFLOW_VERSION
#define KERRFLOW_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace kerrflow;

namespace {

struct RunContext {
    std::string command;
    fs::path out;
    int workers = 1;
    std::uint64_t seed = 0;
    bool save_trajectories = false;
    json config;                       // as loaded
    json resolved;                     // every value actually used
    std::vector<std::string> outputs;
    json diagnostics = json::object();
};

const std::map<std::string, std::set<std::string>> kSchema = {
    {"model", {"delta", "u", "g", "f", "phi", "kappa", "aleph", "omega", "omega0"}},
    {"grid", {"delta_min", "delta_max", "n_delta", "f_min", "f_max", "n_f"}},
    {"sweep", {"delta", "aleph"}},
    {"truncation", {"n", "c1", "c2", "c3", "hard_cap", "tail_tol"}},
    {"ensemble", {"n_traj", "t_burn", "t_total", "dt_s", "initial"}},
    {"spectrum", {"omega_min", "omega_max", "n_omega", "max_lag", "taper", "threshold", "route", "modes"}},
    {"wigner", {"x_min", "x_max", "n_x", "y_min", "y_max", "n_y", "threshold"}},
    {"output", {"save_density", "save_modes"}},
    {"seed", {}},
    {"workers", {}},
};

void check_schema(const json& cfg) {
    if (!cfg.is_object()) throw config_error("config root must be an object");
    for (auto it = cfg.begin(); it != cfg.end(); ++it) {
        auto s = kSchema.find(it.key());
        if (s == kSchema.end()) throw config_error("unknown config section '" + it.key() + "'");
        if (s->second.empty()) continue;
        if (!it.value().is_object()) throw config_error("config section '" + it.key() + "' must be an object");
        for (auto jt = it.value().begin(); jt != it.value().end(); ++jt)
            if (!s->second.count(jt.key()))
                throw config_error("unknown key '" + jt.key() + "' in section '" + it.key() + "'");
    }
}

json section(const json& cfg, const std::string& name) {
    return cfg.contains(name) ? cfg.at(name) : json::object();
}

double num(const json& sec, const std::string& key, double def) {
    if (!sec.contains(key) || sec.at(key).is_null()) return def;
    if (!sec.at(key).is_number()) throw config_error("'" + key + "' must be a number");
    const double v = sec.at(key).get<double>();
    if (!std::isfinite(v)) throw config_error("'" + key + "' must be finite");
    return v;
}

int integer(const json& sec, const std::string& key, int def) {
    if (!sec.contains(key) || sec.at(key).is_null()) return def;
    if (!sec.at(key).is_number_integer()) throw config_error("'" + key + "' must be an integer");
    return sec.at(key).get<int>();
}

bool boolean(const json& sec, const std::string& key, bool def) {
    if (!sec.contains(key) || sec.at(key).is_null()) return def;
    if (!sec.at(key).is_boolean()) throw config_error("'" + key + "' must be true or false");
    return sec.at(key).get<bool>();
}

std::string text(const json& sec, const std::string& key, const std::string& def) {
    if (!sec.contains(key) || sec.at(key).is_null()) return def;
    if (!sec.at(key).is_string()) throw config_error("'" + key + "' must be a string");
    return sec.at(key).get<std::string>();
}

/// A list of values, either explicit or {"min", "max", "n"} (inclusive endpoints).
std::vector<double> values(const json& sec, const std::string& key, double def) {
    if (!sec.contains(key) || sec.at(key).is_null()) return {def};
    const json& v = sec.at(key);
    if (v.is_number()) return {v.get<double>()};
    if (v.is_array()) {
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) throw config_error("'" + key + "' entries must be numbers");
            out.push_back(e.get<double>());
        }
        if (out.empty()) throw config_error("'" + key + "' must not be empty");
        return out;
    }
    if (v.is_object()) {
        const int n = integer(v, "n", 0);
        if (n < 1) throw config_error("'" + key + ".n' must be positive");
        return linspace(num(v, "min", def), num(v, "max", def), n);
    }
    throw config_error("'" + key + "' must be a number, a list or {min, max, n}");
}

ScaledParams model_params(RunContext& ctx) {
    const json m = section(ctx.config, "model");
    ScaledParams sp;
    sp.delta = num(m, "delta", 1.0);
    if (m.contains("omega") || m.contains("omega0")) {
        if (!m.contains("omega") || !m.contains("omega0")) throw config_error("omega and omega0 must be given together");
        sp.delta = detuning_from_frequencies(num(m, "omega", 0.0), num(m, "omega0", 0.0));
    }
    sp.tilde_u = num(m, "u", 1.0);
    sp.g = num(m, "g", 0.4);
    sp.tilde_f = num(m, "f", 0.5);
    sp.phi = num(m, "phi", 0.0);
    sp.kappa = num(m, "kappa", 0.1);
    sp.aleph = num(m, "aleph", 1.0);
    if (!(sp.aleph > 0.0)) throw config_error("model.aleph must be positive");
    ModelParams probe = to_physical(sp);
    probe = canonicalize(probe);
    validate(probe);
    sp.tilde_f = probe.f / std::sqrt(sp.aleph);
    sp.phi = probe.phi;
    ctx.resolved["model"] = to_json(sp);
    return sp;
}

struct Truncation {
    int n = 0;
    TruncationOptions opt;
    SteadyStateOptions steady;
};

Truncation truncation(RunContext& ctx) {
    const json t = section(ctx.config, "truncation");
    Truncation tr;
    tr.n = integer(t, "n", 0);
    tr.opt.c1 = num(t, "c1", tr.opt.c1);
    tr.opt.c2 = num(t, "c2", tr.opt.c2);
    tr.opt.c3 = num(t, "c3", tr.opt.c3);
    tr.opt.hard_cap = integer(t, "hard_cap", tr.opt.hard_cap);
    tr.steady.tail_tol = num(t, "tail_tol", tr.steady.tail_tol);
    if (tr.n != 0 && tr.n < 2) throw config_error("truncation.n must be 0 (automatic) or at least 2");
    ctx.resolved["truncation"] = {{"n", tr.n},          {"c1", tr.opt.c1}, {"c2", tr.opt.c2}, {"c3", tr.opt.c3},
                                  {"hard_cap", tr.opt.hard_cap}, {"tail_tol", tr.steady.tail_tol}};
    return tr;
}

struct SpectrumCfg {
    std::vector<double> omega;
    double max_lag = 0.0;
    double taper = -1.0;
    double threshold = 0.1;
    std::string route = "trajectory";
    int modes = 0;
};

SpectrumCfg spectrum_cfg(RunContext& ctx, double kappa, const std::string& default_route) {
    const json s = section(ctx.config, "spectrum");
    SpectrumCfg c;
    const double lo = num(s, "omega_min", 0.0), hi = num(s, "omega_max", 5.0);
    const int n = integer(s, "n_omega", 1001);
    if (n < 3 || !(hi > lo)) throw config_error("spectrum axis needs omega_max > omega_min and n_omega >= 3");
    c.omega = linspace(lo, hi, n);
    c.max_lag = num(s, "max_lag", 20.0 / kappa);
    c.taper = num(s, "taper", 4.0 / c.max_lag);
    c.threshold = num(s, "threshold", 0.1);
    c.route = text(s, "route", default_route);
    c.modes = integer(s, "modes", 0);
    if (c.route != "trajectory" && c.route != "liouvillian" && c.route != "both")
        throw config_error("spectrum.route must be trajectory, liouvillian or both");
    if (!(c.max_lag > 0.0) || c.taper < 0.0) throw config_error("spectrum.max_lag must be positive, taper >= 0");
    ctx.resolved["spectrum"] = {{"omega_min", lo},          {"omega_max", hi},         {"n_omega", n},
                                {"max_lag", c.max_lag},     {"taper", c.taper},        {"threshold", c.threshold},
                                {"route", c.route},         {"modes", c.modes}};
    return c;
}

struct EnsembleCfg {
    int n_traj = 100;
    double t_burn = 0.0, t_total = 0.0, dt_s = 0.1;
    InitialEnsemble initial = InitialEnsemble::PureState;
    std::string initial_name = "vacuum";
};

EnsembleCfg ensemble_cfg(RunContext& ctx, double kappa, double min_total, const std::string& default_initial) {
    const json e = section(ctx.config, "ensemble");
    EnsembleCfg c;
    c.n_traj = integer(e, "n_traj", 100);
    c.t_burn = num(e, "t_burn", 20.0 / kappa);
    c.dt_s = num(e, "dt_s", 0.1);
    c.t_total = num(e, "t_total", std::max(c.t_burn + min_total, c.t_burn + 200.0 / kappa));
    c.initial_name = text(e, "initial", default_initial);
    if (c.initial_name == "vacuum") c.initial = InitialEnsemble::PureState;
    else if (c.initial_name == "steady_state") c.initial = InitialEnsemble::SteadyStateMixture;
    else if (c.initial_name == "attractors") c.initial = InitialEnsemble::Cycle;
    else throw config_error("ensemble.initial must be vacuum, steady_state or attractors");
    if (c.n_traj < 1 || !(c.dt_s > 0.0) || !(c.t_total > c.t_burn) || c.t_burn < 0.0)
        throw config_error("ensemble needs n_traj >= 1, dt_s > 0 and t_total > t_burn >= 0");
    ctx.resolved["ensemble"] = {{"n_traj", c.n_traj}, {"t_burn", c.t_burn}, {"t_total", c.t_total},
                                {"dt_s", c.dt_s},     {"initial", c.initial_name}};
    return c;
}

ModelParams classical(const ScaledParams& sp) {
    ModelParams q = to_physical(sp);
    q.u = sp.tilde_u;
    q.f = sp.tilde_f;
    return q;
}

std::string out_file(RunContext& ctx, const std::string& name) {
    ctx.outputs.push_back(name);
    return (ctx.out / name).string();
}

void write_manifest(const RunContext& ctx, const std::string& status, const std::string& error = {}) {
    json m;
    m["command"] = ctx.command;
    m["version"] = KERRFLOW_VERSION;
    m["status"] = status;
    if (!error.empty()) m["error"] = error;
    m["workers"] = ctx.workers;
    m["seed"] = ctx.seed;
    m["save_trajectories"] = ctx.save_trajectories;
    m["config"] = ctx.config;
    m["resolved"] = ctx.resolved;
    m["outputs"] = ctx.outputs;
    m["diagnostics"] = ctx.diagnostics;
    m["conventions"] = {{"vectorization", "column stacking"},
                        {"quadratures", "X = (b + b^dag)/(2 sqrt(aleph)), Y = (b - b^dag)/(2i sqrt(aleph))"},
                        {"zeta", "int_0^inf e^{-i Omega tau} e^{-eta tau} <Y(tau)X(0) - X(tau)Y(0)> dtau"},
                        {"chi", "Im zeta(Omega) - Im zeta(-Omega), CW positive"}};
    write_json((ctx.out / "manifest.json").string(), m);
}

// --- phase-diagram ----------------------------------------------------------------------------

void cmd_phase_diagram(RunContext& ctx) {
    const ScaledParams sp = model_params(ctx);
    const ModelParams base = classical(sp);
    const json g = section(ctx.config, "grid");
    PhaseGrid grid;
    grid.delta_min = num(g, "delta_min", grid.delta_min);
    grid.delta_max = num(g, "delta_max", grid.delta_max);
    grid.n_delta = integer(g, "n_delta", grid.n_delta);
    grid.f_min = num(g, "f_min", grid.f_min);
    grid.f_max = num(g, "f_max", grid.f_max);
    grid.n_f = integer(g, "n_f", grid.n_f);
    if (grid.n_delta < 1 || grid.n_f < 1) throw config_error("grid resolutions must be positive");
    ctx.resolved["grid"] = {{"delta_min", grid.delta_min}, {"delta_max", grid.delta_max}, {"n_delta", grid.n_delta},
                            {"f_min", grid.f_min},         {"f_max", grid.f_max},         {"n_f", grid.n_f},
                            {"sampling", "cell centres"}};
    CsvWriter csv(out_file(ctx, "phase_diagram.csv"),
                  {"delta", "f", "region_label", "n_attractors", "n_saddles", "chiralities"});
    std::map<std::string, int> counts;
    json unclassified = json::array();
    int index_violations = 0;
    phase_diagram(grid, base, ctx.workers, {}, [&](int, const std::vector<PhasePoint>& row) {
        for (const auto& pt : row) {
            csv << pt.delta << pt.f << to_string(pt.region) << pt.n_attractors << pt.n_saddles << pt.chiralities;
            csv.end_row();
            ++counts[to_string(pt.region)];
            if (pt.region != Region::Unclassified && pt.n_attractors - pt.n_saddles != 1) ++index_violations;
            if (pt.region == Region::Unclassified)
                unclassified.push_back({{"delta", pt.delta}, {"f", pt.f}, {"diagnostics", pt.diagnostics}});
        }
    });
    json side = {{"region_counts", counts}, {"index_violations", index_violations}, {"unclassified", unclassified}};
    write_json(out_file(ctx, "phase_diagram.json"), side);
    ctx.diagnostics["region_counts"] = counts;
}

// --- steady-state ------------------------------------------------------------------------------

void cmd_steady_state(RunContext& ctx) {
    const ScaledParams sp0 = model_params(ctx);
    const Truncation tr = truncation(ctx);
    const json sw = section(ctx.config, "sweep");
    const auto deltas = values(sw, "delta", sp0.delta);
    const auto alephs = values(sw, "aleph", sp0.aleph);
    const bool save = boolean(section(ctx.config, "output"), "save_density", deltas.size() * alephs.size() <= 16);
    ctx.resolved["sweep"] = {{"delta", deltas}, {"aleph", alephs}};
    ctx.resolved["output"] = {{"save_density", save}};

    struct Row {
        ScaledParams sp;
        DensityMatrix d;
        double rssp = 0.0;
        std::string att, sad, error;
    };
    std::vector<ScaledParams> pts;
    for (double a : alephs)
        for (double d : deltas) {
            ScaledParams sp = sp0;
            sp.aleph = a;
            sp.delta = d;
            pts.push_back(sp);
        }
    CsvWriter csv(out_file(ctx, "rssp.csv"),
                  {"aleph", "delta", "f", "N", "rssp", "tail", "min_eigenvalue", "trace_error", "hermiticity",
                   "residual", "classical_attractor_n", "classical_saddle_n", "status"});
    BinaryContainer bin;
    const size_t block = static_cast<size_t>(std::max(1, ctx.workers));
    for (size_t b0 = 0; b0 < pts.size(); b0 += block) {
        const size_t nb = std::min(block, pts.size() - b0);
        std::vector<Row> rows(nb);
        parallel_for(nb, ctx.workers, [&](size_t i) {
            Row& r = rows[i];
            r.sp = pts[b0 + i];
            try {
                for (const auto& fp : fixed_points(classical(r.sp))) {
                    std::string& dst = fp.fp_class == FpClass::Attractor ? r.att : r.sad;
                    if (fp.fp_class == FpClass::MarginalOrDegenerate) continue;
                    dst += (dst.empty() ? "" : "|") + format_double(fp.n0);
                }
                const ModelParams p = to_physical(r.sp);
                r.d = steady_state_auto(p, r.sp.aleph, tr.steady, tr.opt, tr.n);
                r.d.checks.residual = (liouvillian(p, r.d.space) * vec(r.d.rho)).norm();
                r.rssp = rssp(r.d, r.sp.aleph);
            } catch (const Error& e) {
                r.error = e.what();
            }
        });
        for (auto& r : rows) {
            const bool ok = r.error.empty();
            csv << r.sp.aleph << r.sp.delta << r.sp.tilde_f << (ok ? r.d.space.dim : 0)
                << (ok ? r.rssp : std::nan("")) << (ok ? r.d.checks.tail : std::nan(""))
                << (ok ? r.d.checks.min_eigenvalue : std::nan("")) << (ok ? r.d.checks.trace_error : std::nan(""))
                << (ok ? r.d.checks.hermiticity : std::nan("")) << (ok ? r.d.checks.residual : std::nan(""))
                << r.att << r.sad << (ok ? std::string("ok") : r.error);
            csv.end_row();
            if (ok && save) {
                std::ostringstream name;
                name << "rho[aleph=" << format_double(r.sp.aleph) << ",delta=" << format_double(r.sp.delta) << "]";
                bin.add(name.str(), r.d.rho);
            }
        }
    }
    if (save) bin.write(out_file(ctx, "steady_state.bin"));
}

// --- wigner ------------------------------------------------------------------------------------

void cmd_wigner(RunContext& ctx) {
    const ScaledParams sp = model_params(ctx);
    const Truncation tr = truncation(ctx);
    const json w = section(ctx.config, "wigner");
    const double x0 = num(w, "x_min", -3.0), x1 = num(w, "x_max", 3.0);
    const double y0 = num(w, "y_min", -3.0), y1 = num(w, "y_max", 3.0);
    const int nx = integer(w, "n_x", 121), ny = integer(w, "n_y", 121);
    const double thr = num(w, "threshold", 0.1);
    if (nx < 3 || ny < 3 || !(x1 > x0) || !(y1 > y0)) throw config_error("wigner grid needs at least 3x3 points");
    ctx.resolved["wigner"] = {{"x_min", x0}, {"x_max", x1}, {"n_x", nx},          {"y_min", y0},
                              {"y_max", y1}, {"n_y", ny},   {"threshold", thr}};
    const ModelParams p = to_physical(sp);
    const DensityMatrix d = steady_state_auto(p, sp.aleph, tr.steady, tr.opt, tr.n);
    const WignerGrid grid = wigner(d.rho, linspace(x0, x1, nx), linspace(y0, y1, ny), sp.aleph);
    CsvWriter csv(out_file(ctx, "wigner.csv"), {"x", "y", "W"});
    for (int i = 0; i < ny; ++i)
        for (int j = 0; j < nx; ++j) {
            csv << grid.x_axis[static_cast<size_t>(j)] << grid.y_axis[static_cast<size_t>(i)] << grid.values(i, j);
            csv.end_row();
        }
    const double zpw = 1.0 / std::sqrt(2.0 * sp.aleph);
    std::vector<cplx> attractors;
    json fps = json::array();
    for (const auto& fp : fixed_points(classical(sp))) {
        fps.push_back({{"x", fp.beta0.real()}, {"y", fp.beta0.imag()}, {"n0", fp.n0},
                       {"class", fp.fp_class == FpClass::Attractor ? "attractor"
                                 : fp.fp_class == FpClass::Saddle  ? "saddle"
                                                                   : "marginal"},
                       {"chirality", to_string(fp.chirality)}});
        if (fp.fp_class == FpClass::Attractor) attractors.push_back(fp.beta0);
    }
    json maxima = json::array();
    for (const auto& pk : wigner_maxima(grid, thr)) {
        double dmin = std::numeric_limits<double>::infinity();
        for (cplx a : attractors) dmin = std::min(dmin, std::abs(cplx(pk.x, pk.y) - a));
        maxima.push_back({{"x", pk.x}, {"y", pk.y}, {"W", pk.value}, {"nearest_attractor_zpw", dmin / zpw}});
    }
    json side = {{"N", d.space.dim},
                 {"rssp", rssp(d, sp.aleph)},
                 {"checks", to_json(d.checks)},
                 {"integral", grid.integral},
                 {"expected_integral", 1.0 / sp.aleph},
                 {"min_W", grid.values.minCoeff()},
                 {"boundary_fraction", grid.boundary_fraction},
                 {"boundary_warning", grid.boundary_warning},
                 {"zero_point_width", zpw},
                 {"maxima", maxima},
                 {"fixed_points", fps}};
    write_json(out_file(ctx, "wigner.json"), side);
    ctx.diagnostics["boundary_warning"] = grid.boundary_warning;
}

// --- trajectories ------------------------------------------------------------------------------

void cmd_trajectories(RunContext& ctx) {
    const ScaledParams sp = model_params(ctx);
    const Truncation tr = truncation(ctx);
    const EnsembleCfg ec = ensemble_cfg(ctx, sp.kappa, 0.0, "vacuum");
    const ModelParams p = to_physical(sp);
    EnsembleSpec es;
    es.n_traj = ec.n_traj;
    es.t_burn = ec.t_burn;
    es.t_total = ec.t_total;
    es.dt_s = ec.dt_s;
    es.base_seed = ctx.seed;
    es.initial = ec.initial;
    es.tail_tol = tr.steady.tail_tol;
    if (ec.initial == InitialEnsemble::SteadyStateMixture || tr.n == 0) {
        const DensityMatrix d = steady_state_auto(p, sp.aleph, tr.steady, tr.opt, tr.n);
        es.space = d.space;
        if (ec.initial == InitialEnsemble::SteadyStateMixture) es.initial_rho = d.rho;
    } else {
        es.space = FockSpace(tr.n);
    }
    if (ec.initial == InitialEnsemble::Cycle)
        for (const auto& fp : fixed_points(classical(sp)))
            if (fp.fp_class == FpClass::Attractor)
                es.initial_cycle.push_back(coherent_state(es.space, fp.beta0 * std::sqrt(sp.aleph)));

    const size_t ns = static_cast<size_t>(std::floor(es.t_total / es.dt_s + 1e-9)) + 1;
    const size_t nt = static_cast<size_t>(es.n_traj);
    // per-trajectory series kept by slot so the reduction order is fixed
    std::vector<std::vector<double>> n_r(nt), x_r(nt), y_r(nt);
    std::vector<std::size_t> jumps(nt);
    std::vector<double> tails(nt), stat_n(nt);
    BinaryContainer bin;
    std::vector<TrajectoryRecord> kept(ctx.save_trajectories ? nt : 0);
    const double sa = std::sqrt(sp.aleph);
    run_ensemble_streaming(es, p, ctx.workers, [&](int r, const TrajectoryRecord& rec) {
        const size_t k = static_cast<size_t>(r);
        n_r[k] = rec.n;
        x_r[k] = rec.x;
        y_r[k] = rec.y;
        jumps[k] = rec.jump_times.size();
        tails[k] = rec.max_tail;
        double s = 0.0;
        size_t m = 0;
        for (size_t i = 0; i < rec.times.size(); ++i)
            if (rec.times[i] >= es.t_burn - 1e-9 * es.dt_s) {
                s += rec.n[i];
                ++m;
            }
        stat_n[k] = m ? s / static_cast<double>(m) : 0.0;
        if (ctx.save_trajectories) kept[k] = rec;
    });
    CsvWriter csv(out_file(ctx, "ensemble.csv"), {"t", "mean_n_scaled", "err_n_scaled", "mean_x", "mean_y"});
    const double n = static_cast<double>(nt);
    for (size_t i = 0; i < ns; ++i) {
        double s = 0.0, s2 = 0.0, sx = 0.0, sy = 0.0;
        for (size_t r = 0; r < nt; ++r) {
            const double v = n_r[r][i] / sp.aleph;
            s += v;
            s2 += v * v;
            sx += x_r[r][i] / sa;
            sy += y_r[r][i] / sa;
        }
        const double mean = s / n;
        const double err = nt > 1 ? std::sqrt(std::max(0.0, s2 / n - mean * mean) / (n - 1.0)) : std::nan("");
        csv << static_cast<double>(i) * es.dt_s << mean << err << sx / n << sy / n;
        csv.end_row();
    }
    std::size_t total_jumps = 0;
    double max_tail = 0.0, mean_stat_n = 0.0;
    for (size_t r = 0; r < nt; ++r) {
        total_jumps += jumps[r];
        max_tail = std::max(max_tail, tails[r]);
        mean_stat_n += stat_n[r] / n;
    }
    json seeds = json::array();
    for (size_t r = 0; r < nt; ++r) seeds.push_back(es.base_seed + r);
    const JumpEvolver probe(p, es);
    json side = {{"N", es.space.dim},
                 {"seeds", seeds},
                 {"total_jumps", total_jumps},
                 {"mean_jump_rate", static_cast<double>(total_jumps) / (n * es.t_total)},
                 {"kappa_times_mean_n_after_burn", sp.kappa * mean_stat_n},
                 {"max_tail", max_tail},
                 {"propagator", probe.propagator() == Propagator::Spectral ? "spectral" : "runge-kutta"},
                 {"condition_number", probe.condition_number()},
                 {"integrator", {{"rtol", es.rtol}, {"jump_time_tol", es.jump_time_tol}}}};
    write_json(out_file(ctx, "ensemble.json"), side);
    if (ctx.save_trajectories) {
        std::vector<double> times(ns);
        for (size_t i = 0; i < ns; ++i) times[i] = static_cast<double>(i) * es.dt_s;
        bin.add("times", times);
        for (size_t r = 0; r < nt; ++r) {
            const std::string tag = "[" + std::to_string(es.base_seed + r) + "]";
            bin.add("x" + tag, kept[r].x);
            bin.add("y" + tag, kept[r].y);
            bin.add("n" + tag, kept[r].n);
            bin.add("jump_times" + tag, kept[r].jump_times);
        }
        bin.write(out_file(ctx, "trajectories.bin"));
    }
}

// --- chirality ---------------------------------------------------------------------------------

json peaks_json(const std::vector<SpectralPeak>& pks) {
    json a = json::array();
    for (const auto& pk : pks)
        a.push_back({{"omega0", pk.omega0}, {"width", pk.width}, {"height", pk.height}, {"weight", pk.weight},
                     {"sign", to_string(pk.sign)}, {"merged", pk.merged}});
    return a;
}

void write_spectrum_rows(CsvWriter& csv, double delta, const ChiralitySpectrum& s) {
    double vmax = 0.0;
    for (double v : s.chi) vmax = std::max(vmax, std::abs(v));
    for (size_t i = 0; i < s.omega.size(); ++i) {
        csv << delta << s.omega[i] << s.zeta[i].real() << s.zeta[i].imag() << s.chi[i]
            << (s.chi_err.empty() ? 0.0 : s.chi_err[i]) << (vmax > 0.0 ? s.chi[i] / vmax : 0.0);
        csv.end_row();
    }
}

void cmd_chirality(RunContext& ctx) {
    const ScaledParams sp0 = model_params(ctx);
    const Truncation tr = truncation(ctx);
    const SpectrumCfg sc = spectrum_cfg(ctx, sp0.kappa, "trajectory");
    const auto deltas = values(section(ctx.config, "sweep"), "delta", sp0.delta);
    ctx.resolved["sweep"] = {{"delta", deltas}};
    const bool traj = sc.route != "liouvillian";
    const bool liou = sc.route != "trajectory";
    EnsembleCfg ec;
    if (traj) ec = ensemble_cfg(ctx, sp0.kappa, sc.max_lag, "attractors");
    const std::vector<std::string> header = {"delta", "omega", "re_zeta", "im_zeta", "chi", "chi_err", "chi_norm"};
    std::unique_ptr<CsvWriter> tcsv, lcsv;
    if (traj) tcsv = std::make_unique<CsvWriter>(out_file(ctx, "chirality_trajectory.csv"), header);
    if (liou) lcsv = std::make_unique<CsvWriter>(out_file(ctx, "chirality_liouvillian.csv"), header);
    json points = json::array();
    for (size_t di = 0; di < deltas.size(); ++di) {
        ScaledParams sp = sp0;
        sp.delta = deltas[di];
        json pt = {{"delta", sp.delta}};
        const ModelParams q = classical(sp);
        pt["region"] = to_string(flow_graph(q).region_label);
        pt["bogoliubov"] = peaks_json(bogoliubov_prediction(fixed_points(q)));
        if (traj) {
            EnsembleSpectrumOptions eo;
            eo.n_traj = ec.n_traj;
            eo.t_burn = ec.t_burn;
            eo.t_total = ec.t_total;
            eo.dt_s = ec.dt_s;
            eo.max_lag = sc.max_lag;
            eo.taper = sc.taper;
            eo.base_seed = ctx.seed;
            eo.initial = ec.initial;
            eo.n_override = tr.n;
            eo.workers = ctx.workers;
            eo.steady = tr.steady;
            eo.truncation = tr.opt;
            BinaryContainer bin;
            std::vector<TrajectoryRecord> kept(ctx.save_trajectories ? static_cast<size_t>(ec.n_traj) : 0);
            std::function<void(int, const TrajectoryRecord&)> sink;
            if (ctx.save_trajectories) sink = [&](int r, const TrajectoryRecord& rec) { kept[static_cast<size_t>(r)] = rec; };
            const EnsembleSpectrum es = trajectory_chirality(sp, sc.omega, eo, sink);
            write_spectrum_rows(*tcsv, sp.delta, es.spectrum);
            pt["trajectory"] = {{"N", es.dim},
                                {"n_records", es.spectrum.n_records},
                                {"rssp", es.rssp},
                                {"trajectory_mean_n_scaled", es.mean_n_scaled},
                                {"trajectory_mean_n_err", es.mean_n_err},
                                {"total_jumps", es.total_jumps},
                                {"max_tail", es.max_tail},
                                {"peaks", peaks_json(extract_peaks(es.spectrum, sc.threshold))}};
            if (ctx.save_trajectories) {
                for (const auto& rec : kept) {
                    const std::string tag = "[" + std::to_string(rec.seed) + "]";
                    bin.add("x" + tag, rec.x);
                    bin.add("y" + tag, rec.y);
                    bin.add("jump_times" + tag, rec.jump_times);
                }
                bin.write(out_file(ctx, "trajectories_delta" + std::to_string(di) + ".bin"));
            }
        }
        if (liou) {
            LiouvillianPointOptions lo;
            lo.n_override = tr.n;
            lo.k_modes = sc.modes;
            lo.taper = sc.route == "both" ? sc.taper : 0.0;
            lo.steady = tr.steady;
            lo.truncation = tr.opt;
            const LiouvillianPoint lp = liouvillian_point(sp, sc.omega, lo);
            write_spectrum_rows(*lcsv, sp.delta, lp.zeta);
            pt["liouvillian"] = {{"N", lp.dim},
                                 {"rssp", lp.rssp},
                                 {"gap", lp.gap},
                                 {"taper", lp.zeta.taper},
                                 {"sum_rule_defect", lp.zeta.sum_rule_defect},
                                 {"max_pole_real", lp.zeta.max_pole_real},
                                 {"peaks", peaks_json(extract_peaks(lp.zeta, sc.threshold))}};
        }
        points.push_back(pt);
    }
    write_json(out_file(ctx, "peaks.json"), {{"points", points}});
}

// --- liouvillian -------------------------------------------------------------------------------

void cmd_liouvillian(RunContext& ctx) {
    const ScaledParams sp0 = model_params(ctx);
    const Truncation tr = truncation(ctx);
    const SpectrumCfg sc = spectrum_cfg(ctx, sp0.kappa, "liouvillian");
    const auto deltas = values(section(ctx.config, "sweep"), "delta", sp0.delta);
    const bool save_modes = boolean(section(ctx.config, "output"), "save_modes", false);
    ctx.resolved["sweep"] = {{"delta", deltas}};
    ctx.resolved["output"] = {{"save_modes", save_modes}};
    CsvWriter branches(out_file(ctx, "branches.csv"),
                       {"delta", "k", "re_lambda", "im_lambda", "re_w", "im_w", "abs_w"});
    CsvWriter grid(out_file(ctx, "zeta_grid.csv"), {"delta", "omega", "re_zeta", "im_zeta", "chi", "chi_norm"});
    CsvWriter summary(out_file(ctx, "sweep.csv"),
                      {"delta", "N", "rssp", "gap", "sum_rule_defect", "max_pole_real", "biorthogonality_error",
                       "max_residual", "status"});
    BinaryContainer bin;
    const size_t block = static_cast<size_t>(std::max(1, ctx.workers));
    json peaks = json::array();
    for (size_t b0 = 0; b0 < deltas.size(); b0 += block) {
        const size_t nb = std::min(block, deltas.size() - b0);
        std::vector<LiouvillianPoint> pts(nb);
        std::vector<std::string> errs(nb);
        parallel_for(nb, ctx.workers, [&](size_t i) {
            ScaledParams sp = sp0;
            sp.delta = deltas[b0 + i];
            LiouvillianPointOptions lo;
            lo.n_override = tr.n;
            lo.k_modes = sc.modes;
            lo.taper = 0.0;
            lo.steady = tr.steady;
            lo.truncation = tr.opt;
            try {
                pts[i] = liouvillian_point(sp, sc.omega, lo);
            } catch (const Error& e) {
                errs[i] = e.what();
            }
        });
        for (size_t i = 0; i < nb; ++i) {
            const double d = deltas[b0 + i];
            if (!errs[i].empty()) {
                const double nan = std::nan("");
                summary << d << 0 << nan << nan << nan << nan << nan << nan << errs[i];
                summary.end_row();
                continue;
            }
            const LiouvillianPoint& lp = pts[i];
            summary << d << lp.dim << lp.rssp << lp.gap << lp.zeta.sum_rule_defect << lp.zeta.max_pole_real
                    << lp.spectrum.biorthogonality_error << lp.spectrum.max_residual << "ok";
            summary.end_row();
            for (Eigen::Index k = 0; k < lp.spectrum.eigenvalues.size(); ++k) {
                const cplx l = lp.spectrum.eigenvalues[k], w = lp.weights[static_cast<size_t>(k)];
                branches << d << static_cast<long long>(k) << l.real() << l.imag() << w.real() << w.imag()
                         << std::abs(w);
                branches.end_row();
            }
            double vmax = 0.0;
            for (double v : lp.zeta.chi) vmax = std::max(vmax, std::abs(v));
            for (size_t o = 0; o < lp.zeta.omega.size(); ++o) {
                grid << d << lp.zeta.omega[o] << lp.zeta.zeta[o].real() << lp.zeta.zeta[o].imag() << lp.zeta.chi[o]
                     << (vmax > 0.0 ? lp.zeta.chi[o] / vmax : 0.0);
                grid.end_row();
            }
            peaks.push_back({{"delta", d}, {"peaks", peaks_json(extract_peaks(lp.zeta, sc.threshold))}});
            const std::string tag = "[delta=" + format_double(d) + "]";
            bin.add("eigenvalues" + tag, std::vector<cplx>(lp.spectrum.eigenvalues.data(),
                                                          lp.spectrum.eigenvalues.data() + lp.spectrum.eigenvalues.size()));
            bin.add("weights" + tag, lp.weights);
            if (save_modes) {
                bin.add("right" + tag, lp.spectrum.right);
                bin.add("left" + tag, lp.spectrum.left);
            }
        }
    }
    bin.write(out_file(ctx, "liouvillian.bin"));
    write_json(out_file(ctx, "peaks.json"), {{"points", peaks}});
}

int run(RunContext& ctx, const std::string& config_path, const std::function<void(RunContext&)>& body) {
    try {
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw config_error("cannot open config " + config_path);
            try {
                ctx.config = json::parse(in);
            } catch (const json::exception& e) {
                throw config_error(std::string("config is not valid JSON: ") + e.what());
            }
        } else {
            ctx.config = json::object();
        }
        check_schema(ctx.config);
        if (ctx.config.contains("workers") && ctx.workers <= 0) ctx.workers = integer(ctx.config, "workers", 1);
        if (ctx.workers <= 0) ctx.workers = 1;
        fs::create_directories(ctx.out);
        write_manifest(ctx, "running");
        body(ctx);
        write_manifest(ctx, "complete");
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        if (fs::exists(ctx.out)) write_manifest(ctx, "failed", e.what());
        return exit_code(e.kind());
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::bad_alloc&) {
        std::cerr << "error: out of memory\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Driven-dissipative Kerr resonator: flow topology and chirality spectra"};
    app.require_subcommand(1);
    std::string config_path;
    std::string out_dir = ".";
    int workers = 0;
    long long seed = -1;
    bool save = false;
    app.add_option("--config", config_path, "JSON configuration file");
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--workers", workers, "Worker threads (default: config value or 1)");
    app.add_option("--seed", seed, "Base seed for trajectory ensembles");
    app.add_flag("--save-trajectories", save, "Keep every trajectory record in a binary container");
    struct Command {
        std::string name, help;
        std::function<void(RunContext&)> fn;
    };
    const std::vector<Command> cmds = {
        {"phase-diagram", "Classify the mean-field flow on a (delta, F) grid", cmd_phase_diagram},
        {"steady-state", "Steady states and RSSP over a delta/aleph sweep", cmd_steady_state},
        {"wigner", "Wigner function of the steady state and its maxima", cmd_wigner},
        {"trajectories", "Quantum-jump ensemble and its mean occupation", cmd_trajectories},
        {"chirality", "Chirality spectra from trajectories and/or Liouvillian modes", cmd_chirality},
        {"liouvillian", "Liouvillian eigenvalue branches and spectra over a sweep", cmd_liouvillian}};
    std::vector<CLI::App*> subs;
    for (const auto& c : cmds) {
        CLI::App* s = app.add_subcommand(c.name, c.help);
        s->fallthrough();
        subs.push_back(s);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    for (size_t i = 0; i < cmds.size(); ++i) {
        if (!subs[i]->parsed()) continue;
        RunContext ctx;
        ctx.command = cmds[i].name;
        ctx.out = out_dir;
        ctx.workers = workers;
        ctx.save_trajectories = save;
        return run(ctx, config_path, [&](RunContext& c) {
            c.seed = seed >= 0 ? static_cast<std::uint64_t>(seed)
                               : static_cast<std::uint64_t>(integer(c.config, "seed", 0));
            cmds[i].fn(c);
        });
    }
    return 2;
}
