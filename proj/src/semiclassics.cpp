#include "kerrflow/semiclassics.hpp"

#include "kerrflow/errors.hpp"
#include "kerrflow/ode.hpp"
#include "kerrflow/parallel.hpp"

#include <unsupported/Eigen/Polynomials>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace kerrflow {

std::string to_string(FpClass c) {
    switch (c) {
        case FpClass::Attractor: return "attractor";
        case FpClass::Saddle: return "saddle";
        case FpClass::MarginalOrDegenerate: return "marginal";
    }
    return "?";
}

std::string to_string(Chirality c) {
    switch (c) {
        case Chirality::CW: return "CW";
        case Chirality::CCW: return "CCW";
        case Chirality::NonSpiraling: return "none";
        case Chirality::Undefined: return "undefined";
    }
    return "?";
}

std::string to_string(Region r) {
    switch (r) {
        case Region::R1: return "1";
        case Region::R3a: return "3a";
        case Region::R3b: return "3b";
        case Region::R5a: return "5a";
        case Region::R5b: return "5b";
        case Region::Unclassified: return "unclassified";
    }
    return "?";
}

cplx gpe_rhs(cplx beta, const ModelParams& p) {
    const cplx I(0.0, 1.0);
    const cplx a = cplx(-p.delta + p.u * std::norm(beta), -0.5 * p.kappa);
    return -I * (a * beta + p.g * std::conj(beta) + p.f * std::exp(-I * p.phi));
}

Eigen::Matrix2d linearize(cplx beta, const ModelParams& p) {
    const cplx I(0.0, 1.0);
    const cplx d_beta = -I * cplx(-p.delta + 2.0 * p.u * std::norm(beta), -0.5 * p.kappa);
    const cplx d_conj = -I * (p.u * beta * beta + p.g);
    const cplx dx = d_beta + d_conj;
    const cplx dy = I * (d_beta - d_conj);
    Eigen::Matrix2d J;
    J << dx.real(), dy.real(), dx.imag(), dy.imag();
    return J;
}

namespace {

std::array<cplx, 2> eig2(const Eigen::Matrix2d& J) {
    const double half_tr = 0.5 * J.trace();
    const cplx disc = std::sqrt(cplx(half_tr * half_tr - J.determinant(), 0.0));
    std::array<cplx, 2> ev{half_tr + disc, half_tr - disc};
    if (ev[0].imag() < ev[1].imag()) std::swap(ev[0], ev[1]);
    return ev;
}

Eigen::Vector2d residual_vec(const Eigen::Vector2d& x, const ModelParams& p) {
    const cplx r = gpe_rhs(cplx(x[0], x[1]), p);
    return {r.real(), r.imag()};
}

// Newton iteration on the real 2D system; returns the final residual.
double polish(cplx& beta, const ModelParams& p) {
    Eigen::Vector2d x(beta.real(), beta.imag());
    Eigen::Vector2d r = residual_vec(x, p);
    double best = r.norm();
    Eigen::Vector2d best_x = x;
    for (int it = 0; it < 100 && best > 0.0; ++it) {
        const Eigen::Matrix2d J = linearize(cplx(x[0], x[1]), p);
        const Eigen::Vector2d dx = J.fullPivLu().solve(-r);
        if (!dx.allFinite()) break;
        x += dx;
        r = residual_vec(x, p);
        const double rn = r.norm();
        if (rn < best) {
            best = rn;
            best_x = x;
        } else if (it > 8 && rn >= best) {
            break;
        }
        if (dx.norm() <= 1e-15 * std::max(1.0, x.norm())) break;
    }
    beta = cplx(best_x[0], best_x[1]);
    return best;
}

// Candidate amplitudes at occupation n from the real 2x2 linear system
// M (X, Y)^T = -(Re c, Im c), with M = [[a + G, kappa/2], [-kappa/2, a - G]].
std::vector<cplx> amplitudes_at(double n, const ModelParams& p) {
    const double a = p.u * n - p.delta;
    const double b = -0.5 * p.kappa;
    const cplx c = p.f * std::exp(cplx(0.0, -p.phi));
    Eigen::Matrix2d M;
    M << a + p.g, -b, b, a - p.g;
    const Eigen::Vector2d rhs(-c.real(), -c.imag());
    const double det = M.determinant();
    const double scale = a * a + b * b + p.g * p.g;
    if (std::abs(det) > 1e-8 * std::max(scale, 1e-300)) {
        const Eigen::Vector2d x = M.inverse() * rhs;
        return {cplx(x[0], x[1])};
    }
    // Singular system: particular solution plus a null direction, then |beta|^2 = n.
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Vector2d v = svd.matrixV().col(1);
    Eigen::Vector2d xp = Eigen::Vector2d::Zero();
    const double s0 = svd.singularValues()[0];
    if (s0 > 0.0) xp = svd.matrixV().col(0) * (svd.matrixU().col(0).dot(rhs) / s0);
    const double t2 = n - xp.squaredNorm();
    if (t2 < 0.0) return {cplx(xp[0], xp[1])};
    const double t = std::sqrt(t2);
    const Eigen::Vector2d x1 = xp + t * v, x2 = xp - t * v;
    return {cplx(x1[0], x1[1]), cplx(x2[0], x2[1])};
}

double occupation_scale(const ModelParams& p) {
    if (p.u == 0.0) return 1.0;
    const double au = std::abs(p.u);
    return std::max({1.0, std::abs(p.delta) / au, std::cbrt(p.f * p.f / (au * au))});
}

} // namespace

std::vector<double> stationary_polynomial(const ModelParams& p) {
    // With a = U n - delta: F^2 (G^2 + a^2 + k^2/4) - 2 G F^2 (a cos 2phi + k/2 sin 2phi)
    //                       - n (a^2 + k^2/4 - G^2)^2
    using Poly = std::vector<double>;
    auto mul = [](const Poly& x, const Poly& y) {
        Poly r(x.size() + y.size() - 1, 0.0);
        for (size_t i = 0; i < x.size(); ++i)
            for (size_t j = 0; j < y.size(); ++j) r[i + j] += x[i] * y[j];
        return r;
    };
    auto add = [](Poly x, const Poly& y, double s) {
        if (x.size() < y.size()) x.resize(y.size(), 0.0);
        for (size_t i = 0; i < y.size(); ++i) x[i] += s * y[i];
        return x;
    };
    const double k2 = 0.25 * p.kappa * p.kappa;
    const double F2 = p.f * p.f;
    const Poly a{-p.delta, p.u};
    Poly a2 = mul(a, a);
    a2[0] += k2;                      // a^2 + k^2/4
    Poly q = a2;
    q[0] -= p.g * p.g;                // a^2 + k^2/4 - G^2
    Poly out = add(Poly{F2 * p.g * p.g}, a2, F2);
    out = add(out, a, -2.0 * p.g * F2 * std::cos(2.0 * p.phi));
    out[0] -= 2.0 * p.g * F2 * 0.5 * p.kappa * std::sin(2.0 * p.phi);
    out = add(out, mul(Poly{0.0, 1.0}, mul(q, q)), -1.0);
    return out;
}

std::vector<FixedPoint> fixed_points(const ModelParams& p, const SemiclassicsOptions& opt) {
    validate(p);
    const double s = occupation_scale(p);
    std::vector<double> c = stationary_polynomial(p);
    for (size_t k = 0; k < c.size(); ++k) c[k] *= std::pow(s, static_cast<double>(k));
    double cmax = 0.0;
    for (double v : c) cmax = std::max(cmax, std::abs(v));

    std::vector<std::pair<double, bool>> cand;  // (n, strictly real)
    if (cmax == 0.0) {
        cand.emplace_back(0.0, true);
    } else {
        while (c.size() > 1 && std::abs(c.back()) <= 1e-14 * cmax) c.pop_back();
        if (c.size() == 1) throw numerical_error("stationary polynomial is a non-zero constant");
        Eigen::VectorXd coeffs = Eigen::Map<Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
        Eigen::PolynomialSolver<double, Eigen::Dynamic> solver;
        solver.compute(coeffs);
        for (Eigen::Index i = 0; i < solver.roots().size(); ++i) {
            const cplx r = solver.roots()[i];
            const double tol = 1e-6 * (1.0 + std::abs(r));
            if (std::abs(r.imag()) > tol) continue;
            if (r.real() < -tol) continue;
            double m = std::max(r.real(), 0.0);
            // Newton on the scaled polynomial keeps the root real and sharpens it.
            for (int it = 0; it < 20; ++it) {
                double v = 0.0, dv = 0.0;
                for (size_t k = c.size(); k-- > 0;) {
                    dv = dv * m + v;
                    v = v * m + c[k];
                }
                if (dv == 0.0) break;
                const double step = v / dv;
                const double next = m - step;
                if (!std::isfinite(next) || std::abs(step) > 0.1 * (1.0 + std::abs(m))) break;
                m = std::max(next, 0.0);
                if (std::abs(step) < 1e-16 * (1.0 + m)) break;
            }
            cand.emplace_back(m * s, std::abs(r.imag()) <= 1e-10 * (1.0 + std::abs(r)));
        }
    }

    std::vector<FixedPoint> out;
    double worst = 0.0;
    for (const auto& [n, strict] : cand) {
        for (cplx beta : amplitudes_at(n, p)) {
            const double res = polish(beta, p);
            if (!(res < opt.residual_tol)) {
                if (strict) worst = std::max(worst, res);
                continue;
            }
            bool dup = false;
            for (const auto& fp : out)
                if (std::abs(fp.beta0 - beta) < 1e-8 * std::max(1.0, std::abs(beta))) dup = true;
            if (dup) continue;
            FixedPoint fp;
            fp.beta0 = beta;
            fp.n0 = std::norm(beta);
            fp.residual = res;
            fp.jacobian = linearize(beta, p);
            fp.eigenvalues = eig2(fp.jacobian);
            std::tie(fp.fp_class, fp.chirality) = classify(fp.jacobian, opt.degeneracy_tol * p.kappa);
            out.push_back(fp);
        }
    }
    if (out.empty()) {
        std::ostringstream os;
        os << "fixed-point polish failed to converge (worst residual " << worst << ")";
        throw numerical_error(os.str());
    }
    std::sort(out.begin(), out.end(), [](const FixedPoint& a, const FixedPoint& b) {
        if (a.n0 != b.n0) return a.n0 < b.n0;
        return std::arg(a.beta0) < std::arg(b.beta0);
    });
    return out;
}

std::pair<FpClass, Chirality> classify(const Eigen::Matrix2d& J, double tol) {
    const auto ev = eig2(J);
    const bool spiral = std::abs(ev[0].imag()) > 0.0;
    const Chirality sense = J(1, 0) - J(0, 1) > 0.0 ? Chirality::CCW : Chirality::CW;
    if (ev[0].real() < -tol && ev[1].real() < -tol)
        return {FpClass::Attractor, spiral ? sense : Chirality::NonSpiraling};
    if (J.determinant() < -tol * tol) return {FpClass::Saddle, Chirality::Undefined};
    return {FpClass::MarginalOrDegenerate, spiral ? sense : Chirality::Undefined};
}

FlowTrajectory integrate_flow(cplx beta_init, const ModelParams& p, double t_max,
                              const std::vector<cplx>& attractors, const SemiclassicsOptions& opt,
                              bool record) {
    if (!(t_max > 0.0)) throw invalid_parameter("t_max must be positive");
    double r_cap;
    if (attractors.size() >= 2) {
        double dmin = std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < attractors.size(); ++i)
            for (size_t j = i + 1; j < attractors.size(); ++j)
                dmin = std::min(dmin, std::abs(attractors[i] - attractors[j]));
        r_cap = opt.capture_fraction * dmin;
    } else if (attractors.size() == 1) {
        r_cap = opt.capture_fraction * std::max(1.0, std::abs(attractors[0]));
    } else {
        r_cap = 0.0;
    }
    const double dwell = opt.dwell_kappa / p.kappa;

    using V = Eigen::Vector2d;
    DormandPrince<V> ode(
        [&p](double, const V& y, V& dy) {
            const cplx r = gpe_rhs(cplx(y[0], y[1]), p);
            dy[0] = r.real();
            dy[1] = r.imag();
        },
        OdeOptions{opt.rtol, opt.atol});
    ode.reset(0.0, V(beta_init.real(), beta_init.imag()));

    FlowTrajectory tr;
    if (record) {
        tr.t.push_back(0.0);
        tr.beta.push_back(beta_init);
    }
    int inside = -1;
    double t_enter = 0.0;
    auto nearest = [&](cplx b) {
        for (size_t k = 0; k < attractors.size(); ++k)
            if (std::abs(b - attractors[k]) < r_cap) return static_cast<int>(k);
        return -1;
    };
    inside = nearest(beta_init);
    if (inside >= 0) {
        tr.attractor = inside;
        return tr;
    }
    while (ode.t() < t_max) {
        const double t = ode.step(t_max);
        const cplx b(ode.y()[0], ode.y()[1]);
        if (!(std::abs(b) <= opt.escape_radius))
            throw numerical_error("flow escaped beyond |beta| = " + std::to_string(opt.escape_radius));
        if (record) {
            tr.t.push_back(t);
            tr.beta.push_back(b);
        }
        const int k = nearest(b);
        if (k != inside) {
            inside = k;
            t_enter = t;
        }
        if (inside >= 0 && t - t_enter >= dwell) {
            tr.attractor = inside;
            return tr;
        }
    }
    return tr;
}

FlowTrajectory integrate_flow(cplx beta_init, const ModelParams& p, double t_max, const SemiclassicsOptions& opt) {
    std::vector<cplx> att;
    for (const auto& fp : fixed_points(p, opt))
        if (fp.fp_class == FpClass::Attractor) att.push_back(fp.beta0);
    return integrate_flow(beta_init, p, t_max, att, opt, true);
}

double winding_turns(const std::vector<cplx>& path, cplx center) {
    double total = 0.0;
    for (size_t i = 1; i < path.size(); ++i)
        total += std::arg((path[i] - center) / (path[i - 1] - center));
    return total / (2.0 * std::numbers::pi);
}

FlowGraph flow_graph(const ModelParams& p, const SemiclassicsOptions& opt) {
    FlowGraph g;
    g.nodes = fixed_points(p, opt);
    std::vector<int> att, sad;
    bool marginal = false;
    for (int i = 0; i < static_cast<int>(g.nodes.size()); ++i) {
        switch (g.nodes[i].fp_class) {
            case FpClass::Attractor: att.push_back(i); break;
            case FpClass::Saddle: sad.push_back(i); break;
            default: marginal = true;
        }
    }

    std::vector<cplx> att_beta;
    for (int a : att) att_beta.push_back(g.nodes[a].beta0);
    if (!marginal) {
        for (int s : sad) {
            const FixedPoint& fp = g.nodes[s];
            const double lam = std::max(fp.eigenvalues[0].real(), fp.eigenvalues[1].real());
            const Eigen::Matrix2d& J = fp.jacobian;
            Eigen::Vector2d v1(J(0, 1), lam - J(0, 0)), v2(lam - J(1, 1), J(1, 0));
            Eigen::Vector2d v = v1.norm() >= v2.norm() ? v1 : v2;
            v.normalize();
            const double eps = opt.launch_offset * std::max(1.0, std::abs(fp.beta0));
            for (double sg : {1.0, -1.0}) {
                const cplx start = fp.beta0 + sg * eps * cplx(v[0], v[1]);
                FlowTrajectory tr;
                try {
                    tr = integrate_flow(start, p, opt.t_max_kappa / p.kappa, att_beta, opt, false);
                } catch (const Error& e) {
                    g.diagnostics += std::string("manifold integration failed: ") + e.what() + "; ";
                    continue;
                }
                if (!tr.attractor) {
                    g.diagnostics += "unstable manifold of node " + std::to_string(s) + " not captured; ";
                    continue;
                }
                g.edges.emplace_back(s, att[*tr.attractor]);
            }
        }
    }

    std::vector<Chirality> chir;
    int n_cw = 0, n_ccw = 0, ccw_node = -1;
    for (int a : att) {
        chir.push_back(g.nodes[a].chirality);
        if (g.nodes[a].chirality == Chirality::CW) ++n_cw;
        if (g.nodes[a].chirality == Chirality::CCW) {
            ++n_ccw;
            ccw_node = a;
        }
    }
    std::vector<int> feeding;
    for (const auto& [s, a] : g.edges)
        if (a == ccw_node && std::find(feeding.begin(), feeding.end(), s) == feeding.end()) feeding.push_back(s);

    std::ostringstream pat;
    pat << "A" << att.size() << "S" << sad.size();
    if (marginal) pat << "M";
    pat << ":";
    for (size_t i = 0; i < chir.size(); ++i) pat << (i ? "," : "") << to_string(chir[i]);
    if (n_ccw == 1 && !sad.empty()) pat << ";ccw_in=" << feeding.size();
    g.pattern = pat.str();

    g.region_label = Region::Unclassified;
    const bool edges_ok = g.edges.size() == 2 * sad.size();
    if (marginal || !edges_ok || static_cast<int>(att.size()) - static_cast<int>(sad.size()) != 1) {
        if (!marginal && edges_ok) g.diagnostics += "index rule violated; ";
        return g;
    }
    if (att.size() == 1) {
        g.region_label = Region::R1;
    } else if (att.size() == 2) {
        if (n_cw == 2) g.region_label = Region::R3a;
        else if (n_cw == 1 && n_ccw == 1) g.region_label = Region::R3b;
    } else if (att.size() == 3 && n_cw == 2 && n_ccw == 1) {
        if (feeding.size() == 1) g.region_label = Region::R5b;
        else if (feeding.size() == 2) g.region_label = Region::R5a;
    }
    return g;
}

std::vector<double> cell_centres(double lo, double hi, int n) {
    if (n < 1) throw invalid_parameter("grid resolution must be positive");
    std::vector<double> v(static_cast<size_t>(n));
    const double h = (hi - lo) / n;
    for (int i = 0; i < n; ++i) v[static_cast<size_t>(i)] = lo + (i + 0.5) * h;
    return v;
}

PhasePoint phase_point(double delta, double f, const ModelParams& base, const SemiclassicsOptions& opt) {
    PhasePoint pt;
    pt.delta = delta;
    pt.f = f;
    ModelParams p = base;
    p.delta = delta;
    p.f = f;
    try {
        p = canonicalize(p);
        const FlowGraph g = flow_graph(p, opt);
        pt.region = g.region_label;
        for (const auto& n : g.nodes) {
            if (n.fp_class == FpClass::Attractor) {
                ++pt.n_attractors;
                pt.chiralities += (pt.chiralities.empty() ? "" : "|") + to_string(n.chirality);
            }
            if (n.fp_class == FpClass::Saddle) ++pt.n_saddles;
        }
        pt.diagnostics = g.diagnostics.empty() && g.region_label == Region::Unclassified ? g.pattern : g.diagnostics;
    } catch (const std::exception& e) {
        pt.region = Region::Unclassified;
        pt.diagnostics = e.what();
    }
    return pt;
}

PhaseDiagram phase_diagram(const PhaseGrid& grid, const ModelParams& base, int workers,
                           const SemiclassicsOptions& opt,
                           const std::function<void(int, const std::vector<PhasePoint>&)>& on_row) {
    if (grid.n_delta < 1 || grid.n_f < 1) throw invalid_parameter("phase grid needs positive resolutions");
    const auto ds = cell_centres(grid.delta_min, grid.delta_max, grid.n_delta);
    const auto fs = cell_centres(grid.f_min, grid.f_max, grid.n_f);
    PhaseDiagram pd;
    pd.grid = grid;
    pd.points.reserve(ds.size() * fs.size());
    std::vector<PhasePoint> row(ds.size());
    for (size_t i = 0; i < fs.size(); ++i) {
        parallel_for(ds.size(), workers, [&](size_t j) { row[j] = phase_point(ds[j], fs[i], base, opt); });
        if (on_row) on_row(static_cast<int>(i), row);
        pd.points.insert(pd.points.end(), row.begin(), row.end());
    }
    return pd;
}

} // namespace kerrflow
