/**
 * @file model.hpp
 * @brief Kerr resonator parameters, the aleph scaling and quadrature conventions.
 *
 * Quadratures use the 1/2 convention: X = (b + b^dag)/2, Y = (b - b^dag)/(2i),
 * so that <X> = Re<b> and <Y> = Im<b>. Only U and F carry the aleph scaling,
 * U = U~/aleph and F = F~ sqrt(aleph); delta, G, phi and kappa are shared.
 */
#pragma once

#include <complex>

namespace kerrflow {

using cplx = std::complex<double>;

struct ModelParams {
    double delta = 0.0;
    double u = 0.0;
    double g = 0.0;
    double f = 0.0;
    double phi = 0.0;
    double kappa = 1.0;
};

struct ScaledParams {
    double delta = 0.0;
    double tilde_u = 0.0;
    double g = 0.0;
    double tilde_f = 0.0;
    double phi = 0.0;
    double kappa = 1.0;
    double aleph = 1.0;
};

/// Throws invalid-parameter if kappa <= 0, f < 0 or any field is non-finite.
void validate(const ModelParams& p);

/// Folds a negative F into phi (F -> |F|, phi -> phi + pi) and wraps phi into [0, 2 pi).
ModelParams canonicalize(ModelParams p);

ModelParams to_physical(const ScaledParams& s);
ScaledParams to_scaled(const ModelParams& p, double aleph);

/// Rotating-frame detuning (omega^2 - omega0^2) / (2 omega).
double detuning_from_frequencies(double omega, double omega0);

} // namespace kerrflow
