/**
 * @file semiclassics.hpp
 * @brief Mean-field flow of the driven Kerr resonator: fixed points, stability,
 *        chirality, saddle-attractor connectivity and phase diagrams.
 *
 * Phase space is (X, Y) = (Re beta, Im beta). Jacobians act on (X, Y).
 */
#pragma once

#include "kerrflow/model.hpp"

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace kerrflow {

enum class FpClass { Attractor, Saddle, MarginalOrDegenerate };
enum class Chirality { CW, CCW, NonSpiraling, Undefined };
enum class Region { R1, R3a, R3b, R5a, R5b, Unclassified };

std::string to_string(FpClass c);
std::string to_string(Chirality c);
std::string to_string(Region r);

struct FixedPoint {
    cplx beta0;
    double n0 = 0.0;
    Eigen::Matrix2d jacobian = Eigen::Matrix2d::Zero();
    std::array<cplx, 2> eigenvalues{};
    FpClass fp_class = FpClass::MarginalOrDegenerate;
    Chirality chirality = Chirality::Undefined;
    double residual = 0.0;
};

struct FlowGraph {
    std::vector<FixedPoint> nodes;
    std::vector<std::pair<int, int>> edges;  // (saddle node, attractor node)
    Region region_label = Region::Unclassified;
    std::string pattern;      // compact description of the node/edge pattern
    std::string diagnostics;  // empty unless something went wrong
};

struct SemiclassicsOptions {
    double degeneracy_tol = 1e-8;  // in units of kappa
    double residual_tol = 1e-10;
    double launch_offset = 1e-4;   // times max(1, |beta0|)
    double capture_fraction = 1e-2;
    double dwell_kappa = 10.0;     // dwell time in units of 1/kappa
    double t_max_kappa = 2000.0;   // manifold integration horizon in units of 1/kappa
    double escape_radius = 1e3;
    double rtol = 1e-9;
    double atol = 1e-12;
};

/// d beta/dt = -i[(-delta - i kappa/2 + U|beta|^2) beta + G beta* + F e^{-i phi}].
cplx gpe_rhs(cplx beta, const ModelParams& p);

/// Coefficients (ascending powers of n = |beta|^2) of the stationary polynomial.
std::vector<double> stationary_polynomial(const ModelParams& p);

/// All stationary points, polished and classified.
std::vector<FixedPoint> fixed_points(const ModelParams& p, const SemiclassicsOptions& opt = {});

/// Analytic Jacobian of (dX/dt, dY/dt) at beta.
Eigen::Matrix2d linearize(cplx beta, const ModelParams& p);

/// Stability class and rotation sense; degeneracy_tol is absolute.
std::pair<FpClass, Chirality> classify(const Eigen::Matrix2d& J, double degeneracy_tol);

struct FlowTrajectory {
    std::vector<double> t;
    std::vector<cplx> beta;
    std::optional<int> attractor;  // index into the attractor list supplied
};

/// Integrates the flow until captured by one of `attractors` or until t_max.
/// Throws a numerical error if |beta| exceeds the escape radius.
FlowTrajectory integrate_flow(cplx beta_init, const ModelParams& p, double t_max,
                              const std::vector<cplx>& attractors, const SemiclassicsOptions& opt = {},
                              bool record = true);

/// Convenience overload that locates the attractors itself.
FlowTrajectory integrate_flow(cplx beta_init, const ModelParams& p, double t_max,
                              const SemiclassicsOptions& opt = {});

/// Total signed angle swept around `center`, in turns (CCW positive).
double winding_turns(const std::vector<cplx>& path, cplx center);

FlowGraph flow_graph(const ModelParams& p, const SemiclassicsOptions& opt = {});

struct PhaseGrid {
    double delta_min = -1.0, delta_max = 6.0;
    int n_delta = 100;
    double f_min = 0.0, f_max = 2.0;
    int n_f = 100;
};

/// Cell-centred sample coordinates of a grid axis.
std::vector<double> cell_centres(double lo, double hi, int n);

struct PhasePoint {
    double delta = 0.0;
    double f = 0.0;
    Region region = Region::Unclassified;
    int n_attractors = 0;
    int n_saddles = 0;
    std::string chiralities;
    std::string diagnostics;
};

struct PhaseDiagram {
    PhaseGrid grid;
    std::vector<PhasePoint> points;  // row-major, F outer, delta inner
    const PhasePoint& at(int i_f, int i_delta) const { return points[static_cast<size_t>(i_f) * grid.n_delta + i_delta]; }
};

/// Classifies one (delta, f) point; failures become Unclassified with diagnostics.
PhasePoint phase_point(double delta, double f, const ModelParams& base, const SemiclassicsOptions& opt = {});

/// Rows (fixed F) are evaluated in order, each in parallel over delta; `on_row` sees every finished row.
PhaseDiagram phase_diagram(const PhaseGrid& grid, const ModelParams& base, int workers = 1,
                           const SemiclassicsOptions& opt = {},
                           const std::function<void(int, const std::vector<PhasePoint>&)>& on_row = {});

} // namespace kerrflow
