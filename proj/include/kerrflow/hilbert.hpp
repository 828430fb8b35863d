/**
 * @file hilbert.hpp
 * @brief Truncated Fock-space operators, the Lindblad generator, steady states,
 *        Liouvillian eigenmodes and Wigner functions.
 *
 * Superoperators act on column-stacked density matrices: vec(A rho B) = (B^T kron A) vec(rho).
 * Eigen's default column-major storage means vec(rho) is simply rho.data().
 */
#pragma once

#include "kerrflow/model.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <string>
#include <vector>

namespace kerrflow {

using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using SpMat = Eigen::SparseMatrix<cplx>;

struct FockSpace {
    int dim = 2;
    explicit FockSpace(int n);
    FockSpace() = default;
};

CMat annihilation(const FockSpace& space);
CMat number_op(const FockSpace& space);

/// Quadratures X = (b + b^dag)/(2 sqrt(aleph)), Y = (b - b^dag)/(2i sqrt(aleph)).
CMat quadrature_x(const FockSpace& space, double aleph = 1.0);
CMat quadrature_y(const FockSpace& space, double aleph = 1.0);

/// (-delta + U) n + (U/2) b^dag^2 b^2 + (G/2)(b^dag^2 + b^2) + F (b^dag e^{-i phi} + b e^{i phi}).
CMat hamiltonian(const ModelParams& p, const FockSpace& space);

/// Non-Hermitian generator H - i (kappa/2) b^dag b of the no-jump evolution.
CMat effective_hamiltonian(const ModelParams& p, const FockSpace& space);

/// rho -> -i[H, rho] + kappa (b rho b^dag - {b^dag b, rho}/2), column stacking.
SpMat liouvillian(const ModelParams& p, const FockSpace& space);

/// Truncated coherent state |alpha>, renormalized on the N retained levels.
CVec coherent_state(const FockSpace& space, cplx alpha);

CVec vec(const CMat& rho);
CMat unvec(const CVec& v, int n);

struct DensityChecks {
    double hermiticity = 0.0;   // max |rho - rho^dag|
    double trace_error = 0.0;   // |Tr rho - 1|
    double min_eigenvalue = 0.0;
    double tail = 0.0;          // population of the top 10% of levels
    double residual = 0.0;      // |L rho| when a generator was supplied
};

struct DensityMatrix {
    FockSpace space;
    CMat rho;
    DensityChecks checks;
};

DensityChecks check_density(const CMat& rho);

/// Population of the top ceil(N/10) Fock levels.
double tail_population(const CMat& rho);

struct SteadyStateOptions {
    double tail_tol = 1e-8;
    double positivity_tol = 1e-8;
    bool enforce_tail = true;
};

/// Solves L rho = 0, Tr rho = 1 by replacing the (0,0) equation with the trace functional.
DensityMatrix steady_state(const SpMat& L, const FockSpace& space, const SteadyStateOptions& opt = {});

struct TruncationOptions {
    double c1 = 1.5, c2 = 6.0, c3 = 10.0;
    int hard_cap = 400;
};

/// N from the largest classical occupation among all fixed points of the scaled flow.
FockSpace choose_truncation(const ModelParams& p, double aleph, const TruncationOptions& opt = {});

/// Steady state with automatic doubling of N until the tail check passes.
DensityMatrix steady_state_auto(const ModelParams& p, double aleph, const SteadyStateOptions& sopt = {},
                                const TruncationOptions& topt = {}, int n_override = 0);

double expect(const CMat& op, const CMat& rho);
cplx expect_c(const CMat& op, const CMat& rho);

/// Tr[b^dag b rho] / aleph.
double rssp(const DensityMatrix& rho0, double aleph);

struct LiouvillianSpectrum {
    int dim = 0;                 // Fock dimension N
    Eigen::VectorXcd eigenvalues;
    CMat right;                  // columns: vec(r_k)
    CMat left;                   // columns: vec(l_k), with Tr[l_j^dag r_k] = delta_jk
    std::string method;
    double max_residual = 0.0;
    double biorthogonality_error = 0.0;
    CMat right_op(int k) const { return unvec(right.col(k), dim); }
    CMat left_op(int k) const { return unvec(left.col(k), dim); }
};

struct SpectrumOptions {
    int dense_max_dim = 40;     // Fock dimension up to which a dense solver is used
    double shift = 0.0;         // shift-invert target (real part), offset by shift_offset
    double shift_offset = 1e-3;
    double tol = 1e-12;
    int max_iter = 5000;
};

/// Dense path (N <= dense_max_dim): all N^2 modes ordered by decreasing real part, truncated to k when k > 0.
/// Iterative path: the k modes nearest the shift (shift-invert Arnoldi), which for shift 0 are the slow ones.
LiouvillianSpectrum liouvillian_spectrum(const SpMat& L, const FockSpace& space, int k,
                                         const SpectrumOptions& opt = {});

struct WignerGrid {
    std::vector<double> x_axis, y_axis;  // in units of beta / sqrt(aleph)
    Eigen::MatrixXd values;              // values(i_y, i_x) = W(alpha)
    double integral = 0.0;               // integral over the scaled axes (1/aleph when complete)
    double boundary_fraction = 0.0;
    bool boundary_warning = false;
};

/// W(alpha) = (2/pi) Tr[rho D(alpha) P D(alpha)^dag], via normalized Laguerre recurrences.
double wigner_point(const CMat& rho, cplx alpha);
WignerGrid wigner(const CMat& rho, const std::vector<double>& x_axis, const std::vector<double>& y_axis,
                  double aleph);

struct WignerPeak {
    double x = 0.0, y = 0.0;  // scaled axes, refined by a separable parabola
    double value = 0.0;
};

/// Interior 8-neighbour local maxima above rel_threshold * global maximum, largest first.
std::vector<WignerPeak> wigner_maxima(const WignerGrid& w, double rel_threshold);

} // namespace kerrflow
