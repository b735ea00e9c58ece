#pragma once

#include "pllhb/error.hpp"
#include "pllhb/model.hpp"
#include "pllhb/special.hpp"

#include <array>
#include <cstddef>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace pllhb {

/// Unknowns of the single-harmonic ansatz
///   theta_e(t) = omega_c t + theta_c + pi/2 - beta_c sin(omega_c t).
struct HbSolution {
    double omega_c = 0.0;  ///< rad/s
    double beta_c = 0.0;
    double theta_c = 0.0;  ///< rad, normalized to [0, 2 pi) by refine()
    double residual_norm = std::numeric_limits<double>::quiet_NaN();
};

using HbResiduals = std::array<double, 3>;

/// Residuals of the three balance equations (DC, cosine and sine parts):
///   r1 = w + (K/2) J1 cos(theta) - omega_e_free
///   r2 = w beta cos(psi) - (K/2) |H| (J0 + J2) cos(theta)
///   r3 = w beta sin(psi) - (K/2) |H| (J0 - J2) sin(theta)
HbResiduals hb_residuals_full(const HbSolution& candidate, const PllParameters& params,
                              const FrequencyResponse& response);

/// As above with the response of params.filter at candidate.omega_c.
HbResiduals hb_residuals_full(const HbSolution& candidate, const PllParameters& params);

double euclidean_norm(const HbResiduals& r);

/// Which reading of the tolerance scan inequalities to evaluate.
enum class Formulation {
    /// Symbol-for-symbol: K J1 inside the square root, K |H| outside, and the
    /// non-negative root only.
    PaperVerbatim,
    /// Consistent with hb_residuals_full: (K/2) J1 and (K/2) |H|, with both
    /// signs of sin(theta) tried.
    Rederived,
};

std::string to_string(Formulation f);
Formulation parse_formulation(const std::string& text);

struct ScanSettings {
    std::pair<double, double> omega_range{0.0, 0.0};
    std::pair<double, double> beta_range{0.0, 0.0};
    std::size_t n_omega = 500;
    std::size_t n_beta = 500;
    double delta = 1.0;
    Formulation formulation = Formulation::Rederived;

    /// 500 x 500 grid over omega in (0, 1.05 |omega_e_free|], beta in (0, 1.2].
    static ScanSettings defaults_for(const PllParameters& params);

    void validate() const;

    [[nodiscard]] double omega_at(std::size_t i) const;
    [[nodiscard]] double beta_at(std::size_t j) const;
};

struct GridPoint {
    std::size_t i = 0;  ///< omega index
    std::size_t j = 0;  ///< beta index
    double omega_c = 0.0;
    double beta_c = 0.0;
};

struct IntersectionPoint {
    GridPoint point;
    double theta_c = 0.0;  ///< recovered phase in [0, 2 pi)
};

struct ScanResult {
    ScanSettings settings;
    std::vector<GridPoint> points_eq1;
    std::vector<GridPoint> points_eq2;
    std::vector<IntersectionPoint> intersection;
};

/// 8-connected component of the intersection on the scan grid.
struct ScanCluster {
    std::vector<std::size_t> members;  ///< indices into ScanResult::intersection
    double omega_centroid = 0.0;
    double beta_centroid = 0.0;
    double theta_centroid = 0.0;  ///< circular mean
    double omega_min = 0.0, omega_max = 0.0;
    double beta_min = 0.0, beta_max = 0.0;
};

/// Evaluates the two tolerance inequalities on every grid point. Points are
/// independent; results are ordered by grid index (omega major).
ScanResult scan(const PllParameters& params, const ScanSettings& settings);

/// Connected components of the intersection, largest first (ties by index).
std::vector<ScanCluster> intersection_clusters(const ScanResult& result);

/// CSV `omega_c,beta_c,in_eq1,in_eq2,in_intersection,theta_c` over the full grid.
void write_scan_csv(std::ostream& os, const ScanResult& result);

struct RefineSettings {
    double tolerance = 1e-9;      ///< Euclidean residual norm
    int max_iterations = 100;
    int max_halvings = 30;
    double fd_relative_step = 1e-7;
};

class RefinementError : public NumericalError {
public:
    RefinementError(const std::string& what, HbSolution best) : NumericalError(what), best_(best) {}
    [[nodiscard]] const HbSolution& best() const { return best_; }

private:
    HbSolution best_;
};

/// Damped Newton on hb_residuals_full with a central-difference Jacobian.
/// A negative beta is folded back by (beta, theta) -> (-beta, theta + pi),
/// which leaves the residual norm unchanged.
HbSolution refine(const HbSolution& seed, const PllParameters& params, const RefineSettings& settings = {});

enum class CutoffPolicy { Unbounded, InverseTau2, InverseTau1 };

struct FeasibilityPolicy {
    bool exclude_beta_at_least_one = true;
    CutoffPolicy cutoff = CutoffPolicy::Unbounded;
};

std::string to_string(CutoffPolicy policy);
double cutoff_frequency(const LeadLagFilter& filter, CutoffPolicy policy);

bool feasible(const HbSolution& solution, const LeadLagFilter& filter, const FeasibilityPolicy& policy = {});

/// The ansatz evaluated at time t.
double hb_waveform(const HbSolution& solution, double t);

/// JSON object {omega_c, beta_c, theta_c, residual_norm, formulation, feasible}.
std::string solution_json(const HbSolution& solution, Formulation formulation, bool is_feasible);

}  // namespace pllhb
