/**
 * @file trajectories.hpp
 * @brief Photon-counting quantum-jump unraveling of the Lindblad dynamics.
 *
 * Waiting-time algorithm: between jumps the unnormalized state follows
 * d psi/dt = -i H_eff psi with H_eff = H - i (kappa/2) b^dag b; a jump b psi / |b psi|
 * fires when |psi|^2 falls to a uniform random threshold.
 */
#pragma once

#include "kerrflow/hilbert.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <vector>

namespace kerrflow {

enum class Propagator { Spectral, RungeKutta };
enum class InitialEnsemble { PureState, SteadyStateMixture, Cycle };

struct EnsembleSpec {
    int n_traj = 1;
    double t_burn = 200.0;
    double t_total = 1000.0;
    double dt_s = 0.1;
    std::uint64_t base_seed = 0;
    FockSpace space{2};
    CVec initial_state;                       // empty selects the vacuum
    InitialEnsemble initial = InitialEnsemble::PureState;
    CMat initial_rho;                         // sampled by eigenvector when initial == SteadyStateMixture
    std::vector<CVec> initial_cycle;          // trajectory r starts from entry r mod size when initial == Cycle
    Propagator propagator = Propagator::Spectral;
    double rtol = 1e-8;                       // Runge-Kutta tolerance
    double jump_time_tol = 1e-10;             // relative
    double tail_tol = 1e-8;
    double max_condition = 1e10;              // spectral propagator falls back to Runge-Kutta above this
};

void validate(const EnsembleSpec& spec);

struct TrajectoryRecord {
    std::uint64_t seed = 0;
    double dt_s = 0.0;
    std::vector<double> times;
    std::vector<double> x, y;   // Re <b>, Im <b> in the normalized state
    std::vector<double> n;      // <b^dag b>
    std::vector<cplx> b2;       // <b^2>
    std::vector<double> jump_times;
    double final_norm_check = 0.0;
    double max_tail = 0.0;
    int initial_component = -1; // eigenvector index drawn from the initial mixture
};

/// Precomputed no-jump propagator shared by all trajectories of an ensemble.
class JumpEvolver {
public:
    JumpEvolver(const ModelParams& p, const EnsembleSpec& spec);
    /// `index` is the trajectory's position in the ensemble (selects the Cycle entry).
    TrajectoryRecord run(std::uint64_t seed, std::size_t index = 0) const;
    Propagator propagator() const { return prop_; }
    double condition_number() const { return cond_; }

private:
    struct Impl;
    std::shared_ptr<const Impl> impl_;
    Propagator prop_;
    double cond_ = 1.0;
};

TrajectoryRecord evolve_trajectory(const EnsembleSpec& spec, const ModelParams& p, std::uint64_t seed,
                                   std::size_t index = 0);

/// Trajectory r uses seed base_seed + r; output order is by r regardless of scheduling.
std::vector<TrajectoryRecord> run_ensemble(const EnsembleSpec& spec, const ModelParams& p, int workers = 1);

/// Streaming variant: `sink(r, record)` is invoked once per trajectory (possibly concurrently).
void run_ensemble_streaming(const EnsembleSpec& spec, const ModelParams& p, int workers,
                            const std::function<void(int, const TrajectoryRecord&)>& sink);

/// Uniform doubles in (0, 1) from a seeded Mersenne Twister; the mapping from engine
/// output to doubles is fixed here so streams are identical across standard libraries.
class SeededUniform {
public:
    explicit SeededUniform(std::uint64_t seed);
    double next();

private:
    std::mt19937_64 eng_;
};

/// Master-equation propagation of rho on the given times (Dormand-Prince on vec rho).
std::vector<CMat> evolve_density(const SpMat& L, const CMat& rho0, const std::vector<double>& times,
                                 double rtol = 1e-10, double atol = 1e-12);

} // namespace kerrflow
