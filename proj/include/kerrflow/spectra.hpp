/**
 * @file spectra.hpp
 * @brief Chirality spectrum from trajectory correlators and from the Liouvillian eigenmodes.
 *
 * Both routes produce the one-sided transform
 *   zeta(Omega) = int_0^inf e^{-i Omega tau} e^{-eta tau} C(tau) dtau,
 *   C(tau) = <Y(tau) X(0) - X(tau) Y(0)>,
 * and the signed spectrum chi(Omega) = Im zeta(Omega) - Im zeta(-Omega), positive for
 * clockwise circulation. For a real trajectory correlator chi = 2 Im zeta. On the
 * Liouvillian route zeta(Omega) = sum_{k>0} w_k / (i Omega - lambda_k + eta), so every pole
 * sits at Omega = -i(lambda_k - eta) and zeta is analytic in the lower half-plane.
 */
#pragma once

#include "kerrflow/hilbert.hpp"
#include "kerrflow/semiclassics.hpp"
#include "kerrflow/trajectories.hpp"

#include <cstddef>
#include <functional>
#include <vector>

namespace kerrflow {

enum class SpectrumRoute { Trajectory, Liouvillian };
enum class PeakSign { CWPositive, CCWNegative, Neutral };

const char* to_string(SpectrumRoute r);
const char* to_string(PeakSign s);

struct SpectralPeak {
    double omega0 = 0.0;
    double width = 0.0;    // half-width at half-maximum
    double weight = 0.0;   // signed area pi * height * width
    double height = 0.0;   // signed value of chi at the extremum
    PeakSign sign = PeakSign::Neutral;
    bool merged = false;   // no clean isolated Lorentzian around this extremum
};

struct ChiralitySpectrum {
    SpectrumRoute route = SpectrumRoute::Liouvillian;
    std::vector<double> omega;
    std::vector<cplx> zeta;
    std::vector<double> chi;
    std::vector<double> chi_err;   // jackknife over trajectories; empty on the Liouvillian route
    double taper = 0.0;            // eta
    double aleph = 1.0;
    int n_records = 0;
    int n_modes = 0;
    // Liouvillian route diagnostics
    cplx weight_sum{0.0, 0.0};     // sum of included w_k
    double sum_rule_defect = 0.0;  // |weight_sum + i/(2 aleph)| / sum |w_k|
    double max_pole_real = 0.0;    // max_k>0 Re lambda_k
};

/// G(tau_j) = <Y(t) X(t + tau_j) - X(t) Y(t + tau_j)>_t over samples with t >= t_burn,
/// tau_j = j dt_s for j = 0 .. round(max_lag/dt_s). Coordinates are divided by sqrt(aleph).
std::vector<double> lag_correlator(const TrajectoryRecord& rec, double t_burn, double max_lag, double aleph = 1.0);

struct TrajectorySpectrumOptions {
    double t_burn = 200.0;
    double max_lag = 200.0;
    double taper = -1.0;   // eta; negative selects 4 / max_lag
    double aleph = 1.0;
};

double resolved_taper(const TrajectorySpectrumOptions& opt);

/// Per-trajectory spectra stored by slot so records can be streamed and discarded; distinct
/// slots may be filled concurrently and the final reduction runs in slot order.
class TrajectorySpectrumAccumulator {
public:
    TrajectorySpectrumAccumulator(std::vector<double> omega, double dt_s, const TrajectorySpectrumOptions& opt,
                                  int n_slots);
    void add(int slot, const TrajectoryRecord& rec);
    void add_correlator(int slot, const std::vector<double>& g);
    ChiralitySpectrum result() const;

private:
    std::vector<double> omega_;
    double dt_s_;
    TrajectorySpectrumOptions opt_;
    CMat kernel_;                     // (omega, lag) -> trapezoid weight * e^{-eta tau} e^{-i Omega tau}
    std::vector<Eigen::VectorXcd> zetas_;
    std::vector<char> filled_;
};

ChiralitySpectrum zeta_from_trajectories(const std::vector<TrajectoryRecord>& records,
                                         const std::vector<double>& omega, const TrajectorySpectrumOptions& opt);

/// w_k = Tr[Y r_k] Tr[l_k^dag X rho0] - Tr[X r_k] Tr[l_k^dag Y rho0]; w_0 = 0.
std::vector<cplx> liouvillian_weights(const LiouvillianSpectrum& spec, const CMat& rho0, double aleph = 1.0);

struct LiouvillianZetaOptions {
    double aleph = 1.0;
    double taper = 0.0;              // eta, matches the trajectory-route taper when comparing
    double sum_rule_tol = 1e-3;      // missing weight relative to the included absolute weight
};

ChiralitySpectrum zeta_from_liouvillian(const LiouvillianSpectrum& spec, const CMat& rho0,
                                        const std::vector<double>& omega, const LiouvillianZetaOptions& opt = {});

/// One peak per attractor at |Im mu| with half-width |Re mu|; saddles and marginal points give none.
std::vector<SpectralPeak> bogoliubov_prediction(const std::vector<FixedPoint>& fps);

/// Extrema of chi on Omega > 0 above threshold * max|chi|, each refined by a Lorentzian fit
/// (a parabola through 1/chi over the half-maximum window).
std::vector<SpectralPeak> extract_peaks(const ChiralitySpectrum& s, double threshold);

std::vector<double> linspace(double lo, double hi, int n);

/// Steady state, eigenmodes and Liouvillian-route spectrum at one scaled parameter point.
struct LiouvillianPoint {
    ScaledParams params;
    int dim = 0;
    double rssp = 0.0;
    double gap = 0.0;                  // min_k>0 |Re lambda_k|
    DensityChecks checks;
    LiouvillianSpectrum spectrum;
    std::vector<cplx> weights;
    ChiralitySpectrum zeta;
};

struct LiouvillianPointOptions {
    int n_override = 0;                // Fock dimension; 0 selects choose_truncation with doubling
    int k_modes = 0;                   // 0 keeps every mode (dense path only)
    double taper = 0.0;
    SteadyStateOptions steady;
    TruncationOptions truncation;
    SpectrumOptions solver;
};

LiouvillianPoint liouvillian_point(const ScaledParams& sp, const std::vector<double>& omega,
                                   const LiouvillianPointOptions& opt = {});

struct EnsembleSpectrumOptions {
    int n_traj = 100;
    double t_burn = 200.0;
    double t_total = 2000.0;
    double dt_s = 0.1;
    double max_lag = 200.0;
    double taper = -1.0;
    std::uint64_t base_seed = 0;
    InitialEnsemble initial = InitialEnsemble::SteadyStateMixture;  // Cycle starts on the classical attractors
    int n_override = 0;
    int workers = 1;
    SteadyStateOptions steady;
    TruncationOptions truncation;
};

struct EnsembleSpectrum {
    ChiralitySpectrum spectrum;
    int dim = 0;
    double rssp = 0.0;                 // master-equation steady state
    double mean_n_scaled = 0.0;        // trajectory time average of <n>/aleph after burn-in
    double mean_n_err = 0.0;           // standard error over trajectories
    std::size_t total_jumps = 0;
    double max_tail = 0.0;
    Propagator propagator = Propagator::Spectral;
};

/// Trajectory-route spectrum at one scaled point; `sink` additionally receives every record.
EnsembleSpectrum trajectory_chirality(const ScaledParams& sp, const std::vector<double>& omega,
                                      const EnsembleSpectrumOptions& opt,
                                      const std::function<void(int, const TrajectoryRecord&)>& sink = {});

} // namespace kerrflow
