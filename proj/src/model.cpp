#include "kerrflow/model.hpp"

#include "kerrflow/errors.hpp"

#include <cmath>
#include <numbers>

namespace kerrflow {

void validate(const ModelParams& p) {
    for (double v : {p.delta, p.u, p.g, p.f, p.phi, p.kappa})
        if (!std::isfinite(v)) throw invalid_parameter("model parameters must be finite");
    if (p.kappa <= 0.0) throw invalid_parameter("kappa must be positive");
    if (p.f < 0.0) throw invalid_parameter("f must be non-negative (carry its sign in phi)");
}

ModelParams canonicalize(ModelParams p) {
    if (p.f < 0.0) {
        p.f = -p.f;
        p.phi += std::numbers::pi;
    }
    p.phi = std::fmod(p.phi, 2.0 * std::numbers::pi);
    if (p.phi < 0.0) p.phi += 2.0 * std::numbers::pi;
    return p;
}

ModelParams to_physical(const ScaledParams& s) {
    if (!(s.aleph > 0.0)) throw invalid_parameter("aleph must be positive");
    ModelParams p;
    p.delta = s.delta;
    p.u = s.tilde_u / s.aleph;
    p.g = s.g;
    p.f = s.tilde_f * std::sqrt(s.aleph);
    p.phi = s.phi;
    p.kappa = s.kappa;
    return p;
}

ScaledParams to_scaled(const ModelParams& p, double aleph) {
    if (!(aleph > 0.0)) throw invalid_parameter("aleph must be positive");
    ScaledParams s;
    s.delta = p.delta;
    s.tilde_u = p.u * aleph;
    s.g = p.g;
    s.tilde_f = p.f / std::sqrt(aleph);
    s.phi = p.phi;
    s.kappa = p.kappa;
    s.aleph = aleph;
    return s;
}

double detuning_from_frequencies(double omega, double omega0) {
    if (!(omega > 0.0)) throw invalid_parameter("drive frequency must be positive");
    return (omega * omega - omega0 * omega0) / (2.0 * omega);
}

} // namespace kerrflow
