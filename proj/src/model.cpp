#include "pllhb/model.hpp"

#include "pllhb/error.hpp"
#include "pllhb/io.hpp"

#include <numbers>

namespace pllhb {

void validate(const LeadLagFilter& filter) {
    if (!(filter.tau1 > 0.0) || !std::isfinite(filter.tau1)) {
        throw ParameterError("tau1 must be positive and finite");
    }
    if (!(filter.tau2 >= 0.0) || !std::isfinite(filter.tau2)) {
        throw ParameterError("tau2 must be non-negative and finite");
    }
}

void validate(const PllParameters& params) {
    if (!(params.k_vco > 0.0) || !std::isfinite(params.k_vco)) {
        throw ParameterError("k_vco must be positive and finite");
    }
    if (!std::isfinite(params.omega_e_free)) {
        throw ParameterError("omega_e_free must be finite");
    }
    validate(params.filter);
}

FilterRealization realize_lead_lag(const LeadLagFilter& filter) {
    validate(filter);
    const double t1 = filter.tau1;
    const double t2 = filter.tau2;
    return {-1.0 / t1, 1.0, (t1 - t2) / (t1 * t1), t2 / t1};
}

std::complex<double> transfer_function(const FilterRealization& r, std::complex<double> s) {
    return -r.c * r.b / (r.a - s) + r.h;
}

std::complex<double> lead_lag_transfer(const LeadLagFilter& filter, std::complex<double> s) {
    return (1.0 + filter.tau2 * s) / (1.0 + filter.tau1 * s);
}

std::vector<SystemState> equilibria(const PllParameters& p, const FilterRealization& r) {
    // theta' = 0 with x eliminated reduces to phi(theta) H(0) = omega_e_free / k_vco.
    const double s = 2.0 * p.omega_e_free / p.k_vco;
    if (!(std::abs(s) <= 1.0)) {
        return {};
    }
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const auto at = [&](double theta) {
        if (theta < 0.0) {
            theta += two_pi;
        }
        if (theta >= two_pi) {
            theta -= two_pi;
        }
        return SystemState{-r.b * pd_characteristic(theta) / r.a, theta};
    };
    const double base = std::asin(s);
    if (std::abs(s) == 1.0) {
        return {at(base)};
    }
    return {at(base), at(std::numbers::pi - base)};
}

std::pair<SystemState, PllParameters> apply_symmetry(const SystemState& s, const PllParameters& p) {
    PllParameters mirrored = p;
    mirrored.omega_e_free = -p.omega_e_free;
    return {SystemState{-s.x, -s.theta_e}, mirrored};
}

std::string to_config_text(const PllParameters& p) {
    std::string out;
    out += "k_vco=" + io::format_double(p.k_vco) + "\n";
    out += "omega_e_free=" + io::format_double(p.omega_e_free) + "\n";
    out += "tau1=" + io::format_double(p.filter.tau1) + "\n";
    out += "tau2=" + io::format_double(p.filter.tau2) + "\n";
    return out;
}

PllParameters parse_parameters(std::string_view text) {
    const auto config = io::parse_key_value(text);
    PllParameters p;
    p.k_vco = io::require_double(config, "k_vco");
    p.omega_e_free = io::require_double(config, "omega_e_free");
    p.filter.tau1 = io::require_double(config, "tau1");
    p.filter.tau2 = io::require_double(config, "tau2");
    validate(p);
    return p;
}

}  // namespace pllhb
