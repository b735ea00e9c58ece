#include "pllhb/hb.hpp"

#include "pllhb/io.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numbers>
#include <ostream>

namespace pllhb {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_two_pi(double angle) {
    double r = std::fmod(angle, kTwoPi);
    if (r < 0.0) {
        r += kTwoPi;
    }
    return r >= kTwoPi ? 0.0 : r;
}

struct BesselTriple {
    double j0;
    double j1;
    double j2;
};

BesselTriple bessel_triple(double beta) { return {bessel_j(0, beta), bessel_j(1, beta), bessel_j(2, beta)}; }

HbResiduals residuals(double w, double beta, double theta, const PllParameters& p, const FrequencyResponse& resp,
                      const BesselTriple& j) {
    const double half_k = 0.5 * p.k_vco;
    return {w + half_k * j.j1 * std::cos(theta) - p.omega_e_free,
            w * beta * std::cos(resp.phase) - half_k * resp.magnitude * (j.j0 + j.j2) * std::cos(theta),
            w * beta * std::sin(resp.phase) - half_k * resp.magnitude * (j.j0 - j.j2) * std::sin(theta)};
}

struct PointEval {
    bool eq1 = false;
    bool eq2 = false;
    double theta = 0.0;
};

PointEval evaluate_point(double w, double beta, const PllParameters& p, const FrequencyResponse& resp,
                         const BesselTriple& j, double delta, Formulation formulation) {
    PointEval out;
    const double m = resp.magnitude;
    const double cos_psi = std::cos(resp.phase);
    const double sin_psi = std::sin(resp.phase);
    const double e1 = w - p.omega_e_free * 2.0 * m / (beta * beta * cos_psi + 2.0 * m);
    out.eq1 = std::abs(e1) < delta;

    const double lhs = w * beta * sin_psi;
    if (formulation == Formulation::PaperVerbatim) {
        const double c = (p.omega_e_free - w) / (p.k_vco * j.j1);
        const double arg = 1.0 - c * c;
        if (arg >= 0.0) {
            const double s = std::sqrt(arg);
            const double e2 = lhs - p.k_vco * m * (j.j0 - j.j2) * s;
            out.eq2 = std::abs(e2) < delta;
            out.theta = wrap_two_pi(std::atan2(s, c));
        }
    } else {
        const double c = (p.omega_e_free - w) / (0.5 * p.k_vco * j.j1);
        const double arg = 1.0 - c * c;
        if (arg >= 0.0) {
            const double s = std::sqrt(arg);
            const double coef = 0.5 * p.k_vco * m * (j.j0 - j.j2);
            const double e_pos = std::abs(lhs - coef * s);
            const double e_neg = std::abs(lhs + coef * s);
            out.eq2 = std::min(e_pos, e_neg) < delta;
            out.theta = wrap_two_pi(std::atan2(e_neg < e_pos ? -s : s, c));
        }
    }
    return out;
}

}  // namespace

HbResiduals hb_residuals_full(const HbSolution& candidate, const PllParameters& params,
                              const FrequencyResponse& response) {
    return residuals(candidate.omega_c, candidate.beta_c, candidate.theta_c, params, response,
                     bessel_triple(candidate.beta_c));
}

HbResiduals hb_residuals_full(const HbSolution& candidate, const PllParameters& params) {
    return hb_residuals_full(candidate, params, lead_lag_response(params.filter, candidate.omega_c));
}

double euclidean_norm(const HbResiduals& r) { return std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]); }

std::string to_string(Formulation f) {
    return f == Formulation::PaperVerbatim ? "paper-verbatim" : "rederived";
}

Formulation parse_formulation(const std::string& text) {
    if (text == "paper-verbatim" || text == "paper" || text == "verbatim") {
        return Formulation::PaperVerbatim;
    }
    if (text == "rederived") {
        return Formulation::Rederived;
    }
    throw ParameterError("unknown formulation '" + text + "' (expected rederived or paper-verbatim)");
}

ScanSettings ScanSettings::defaults_for(const PllParameters& params) {
    ScanSettings s;
    const double w_max = 1.05 * std::abs(params.omega_e_free);
    s.omega_range = {w_max / static_cast<double>(s.n_omega), w_max};
    s.beta_range = {1.2 / static_cast<double>(s.n_beta), 1.2};
    return s;
}

void ScanSettings::validate() const {
    const auto ordered = [](const std::pair<double, double>& r) {
        return r.first > 0.0 && r.second > r.first && std::isfinite(r.second);
    };
    if (!ordered(omega_range)) {
        throw ParameterError("omega range must be positive and ordered");
    }
    if (!ordered(beta_range)) {
        throw ParameterError("beta range must be positive and ordered");
    }
    if (beta_range.second > kBesselDomain) {
        throw ParameterError("beta range exceeds the Bessel series domain");
    }
    if (n_omega < 2 || n_beta < 2) {
        throw ParameterError("scan grid needs at least 2 points per axis");
    }
    if (!(delta > 0.0) || !std::isfinite(delta)) {
        throw ParameterError("delta must be positive");
    }
}

double ScanSettings::omega_at(std::size_t i) const {
    return omega_range.first +
           (omega_range.second - omega_range.first) * static_cast<double>(i) / static_cast<double>(n_omega - 1);
}

double ScanSettings::beta_at(std::size_t j) const {
    return beta_range.first +
           (beta_range.second - beta_range.first) * static_cast<double>(j) / static_cast<double>(n_beta - 1);
}

ScanResult scan(const PllParameters& params, const ScanSettings& settings) {
    validate(params);
    settings.validate();
    ScanResult result;
    result.settings = settings;

    std::vector<BesselTriple> bessel(settings.n_beta);
    for (std::size_t j = 0; j < settings.n_beta; ++j) {
        bessel[j] = bessel_triple(settings.beta_at(j));
    }
    for (std::size_t i = 0; i < settings.n_omega; ++i) {
        const double w = settings.omega_at(i);
        const FrequencyResponse resp = lead_lag_response(params.filter, w);
        for (std::size_t j = 0; j < settings.n_beta; ++j) {
            const double beta = settings.beta_at(j);
            const PointEval e =
                evaluate_point(w, beta, params, resp, bessel[j], settings.delta, settings.formulation);
            const GridPoint gp{i, j, w, beta};
            if (e.eq1) {
                result.points_eq1.push_back(gp);
            }
            if (e.eq2) {
                result.points_eq2.push_back(gp);
            }
            if (e.eq1 && e.eq2) {
                result.intersection.push_back({gp, e.theta});
            }
        }
    }
    return result;
}

std::vector<ScanCluster> intersection_clusters(const ScanResult& result) {
    const std::size_t nw = result.settings.n_omega;
    const std::size_t nb = result.settings.n_beta;
    constexpr auto kNone = static_cast<std::size_t>(-1);
    std::vector<std::size_t> owner(nw * nb, kNone);
    for (std::size_t k = 0; k < result.intersection.size(); ++k) {
        const GridPoint& gp = result.intersection[k].point;
        owner[gp.i * nb + gp.j] = k;
    }

    std::vector<bool> seen(result.intersection.size(), false);
    std::vector<ScanCluster> clusters;
    for (std::size_t start = 0; start < result.intersection.size(); ++start) {
        if (seen[start]) {
            continue;
        }
        ScanCluster cluster;
        std::deque<std::size_t> queue{start};
        seen[start] = true;
        while (!queue.empty()) {
            const std::size_t k = queue.front();
            queue.pop_front();
            cluster.members.push_back(k);
            const GridPoint& gp = result.intersection[k].point;
            for (int di = -1; di <= 1; ++di) {
                for (int dj = -1; dj <= 1; ++dj) {
                    const auto ii = static_cast<std::ptrdiff_t>(gp.i) + di;
                    const auto jj = static_cast<std::ptrdiff_t>(gp.j) + dj;
                    if (ii < 0 || jj < 0 || ii >= static_cast<std::ptrdiff_t>(nw) ||
                        jj >= static_cast<std::ptrdiff_t>(nb)) {
                        continue;
                    }
                    const std::size_t other = owner[static_cast<std::size_t>(ii) * nb + static_cast<std::size_t>(jj)];
                    if (other != kNone && !seen[other]) {
                        seen[other] = true;
                        queue.push_back(other);
                    }
                }
            }
        }
        std::sort(cluster.members.begin(), cluster.members.end());

        double sw = 0.0, sb = 0.0, sc = 0.0, ss = 0.0;
        cluster.omega_min = cluster.beta_min = std::numeric_limits<double>::infinity();
        cluster.omega_max = cluster.beta_max = -std::numeric_limits<double>::infinity();
        for (std::size_t k : cluster.members) {
            const IntersectionPoint& ip = result.intersection[k];
            sw += ip.point.omega_c;
            sb += ip.point.beta_c;
            sc += std::cos(ip.theta_c);
            ss += std::sin(ip.theta_c);
            cluster.omega_min = std::min(cluster.omega_min, ip.point.omega_c);
            cluster.omega_max = std::max(cluster.omega_max, ip.point.omega_c);
            cluster.beta_min = std::min(cluster.beta_min, ip.point.beta_c);
            cluster.beta_max = std::max(cluster.beta_max, ip.point.beta_c);
        }
        const auto count = static_cast<double>(cluster.members.size());
        cluster.omega_centroid = sw / count;
        cluster.beta_centroid = sb / count;
        cluster.theta_centroid = wrap_two_pi(std::atan2(ss, sc));
        clusters.push_back(std::move(cluster));
    }
    std::stable_sort(clusters.begin(), clusters.end(), [](const ScanCluster& a, const ScanCluster& b) {
        return a.members.size() > b.members.size();
    });
    return clusters;
}

void write_scan_csv(std::ostream& os, const ScanResult& result) {
    const std::size_t nw = result.settings.n_omega;
    const std::size_t nb = result.settings.n_beta;
    std::vector<std::uint8_t> flags(nw * nb, 0);
    std::vector<double> theta(nw * nb, 0.0);
    for (const GridPoint& gp : result.points_eq1) {
        flags[gp.i * nb + gp.j] |= 1U;
    }
    for (const GridPoint& gp : result.points_eq2) {
        flags[gp.i * nb + gp.j] |= 2U;
    }
    for (const IntersectionPoint& ip : result.intersection) {
        flags[ip.point.i * nb + ip.point.j] |= 4U;
        theta[ip.point.i * nb + ip.point.j] = ip.theta_c;
    }
    os << "omega_c,beta_c,in_eq1,in_eq2,in_intersection,theta_c\n";
    for (std::size_t i = 0; i < nw; ++i) {
        const std::string w = io::format_double(result.settings.omega_at(i));
        for (std::size_t j = 0; j < nb; ++j) {
            const std::uint8_t f = flags[i * nb + j];
            os << w << ',' << io::format_double(result.settings.beta_at(j)) << ',' << ((f & 1U) ? 1 : 0) << ','
               << ((f & 2U) ? 1 : 0) << ',' << ((f & 4U) ? 1 : 0) << ',';
            if (f & 4U) {
                os << io::format_double(theta[i * nb + j]);
            }
            os << '\n';
        }
    }
}

HbSolution refine(const HbSolution& seed, const PllParameters& params, const RefineSettings& settings) {
    validate(params);
    using Vec3 = Eigen::Vector3d;
    const auto inside = [](const Vec3& v) {
        return v[0] > 0.0 && std::abs(v[1]) <= kBesselDomain && std::isfinite(v[2]);
    };
    const auto eval = [&](const Vec3& v) {
        const HbResiduals r = hb_residuals_full({v[0], v[1], v[2]}, params);
        return Vec3{r[0], r[1], r[2]};
    };
    const auto pack = [](const Vec3& v, double norm) {
        HbSolution s{v[0], v[1], v[2], norm};
        if (s.beta_c < 0.0) {
            s.beta_c = -s.beta_c;
            s.theta_c += std::numbers::pi;
        }
        s.theta_c = wrap_two_pi(s.theta_c);
        return s;
    };

    Vec3 v{seed.omega_c, seed.beta_c, seed.theta_c};
    if (!inside(v)) {
        throw DomainError("refine: seed outside omega > 0, |beta| <= 10");
    }
    Vec3 r = eval(v);
    double norm = r.norm();
    if (!std::isfinite(norm)) {
        throw NumericalError("refine: seed residual is not finite");
    }

    for (int iter = 0; iter <= settings.max_iterations; ++iter) {
        if (norm < settings.tolerance) {
            return pack(v, norm);
        }
        if (iter == settings.max_iterations) {
            break;
        }
        Eigen::Matrix3d jac;
        for (int k = 0; k < 3; ++k) {
            const double step = settings.fd_relative_step * std::max(std::abs(v[k]), 1.0);
            Vec3 hi = v;
            Vec3 lo = v;
            hi[k] += step;
            lo[k] -= step;
            if (!inside(lo)) {
                lo = v;
                jac.col(k) = (eval(hi) - eval(lo)) / step;
            } else {
                jac.col(k) = (eval(hi) - eval(lo)) / (2.0 * step);
            }
        }
        const Eigen::FullPivLU<Eigen::Matrix3d> lu(jac);
        if (!lu.isInvertible()) {
            throw RefinementError("refine: singular Jacobian", pack(v, norm));
        }
        const Vec3 delta = lu.solve(-r);

        double lambda = 1.0;
        bool accepted = false;
        bool left_box = false;
        for (int halving = 0; halving <= settings.max_halvings; ++halving, lambda *= 0.5) {
            const Vec3 trial = v + lambda * delta;
            if (!inside(trial)) {
                left_box = true;
                continue;
            }
            const Vec3 r_trial = eval(trial);
            const double n_trial = r_trial.norm();
            if (std::isfinite(n_trial) && n_trial < norm) {
                v = trial;
                r = r_trial;
                norm = n_trial;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (left_box) {
                throw DomainError("refine: Newton iterate left the feasibility box (omega <= 0 or |beta| > 10)");
            }
            throw RefinementError("refine: no decrease after step halving", pack(v, norm));
        }
    }
    throw RefinementError("refine: no convergence within the iteration limit", pack(v, norm));
}

std::string to_string(CutoffPolicy policy) {
    switch (policy) {
        case CutoffPolicy::Unbounded: return "unbounded";
        case CutoffPolicy::InverseTau2: return "inverse-tau2";
        case CutoffPolicy::InverseTau1: return "inverse-tau1";
    }
    return "unbounded";
}

double cutoff_frequency(const LeadLagFilter& filter, CutoffPolicy policy) {
    switch (policy) {
        case CutoffPolicy::Unbounded: return std::numeric_limits<double>::infinity();
        case CutoffPolicy::InverseTau2:
            return filter.tau2 > 0.0 ? 1.0 / filter.tau2 : std::numeric_limits<double>::infinity();
        case CutoffPolicy::InverseTau1: return 1.0 / filter.tau1;
    }
    return std::numeric_limits<double>::infinity();
}

bool feasible(const HbSolution& solution, const LeadLagFilter& filter, const FeasibilityPolicy& policy) {
    if (!std::isfinite(solution.omega_c) || !std::isfinite(solution.beta_c) || !std::isfinite(solution.theta_c)) {
        return false;
    }
    if (!(solution.beta_c > 0.0)) {
        return false;
    }
    if (policy.exclude_beta_at_least_one && !(solution.beta_c < 1.0)) {
        return false;
    }
    if (!(solution.omega_c > 0.0 && solution.omega_c < cutoff_frequency(filter, policy.cutoff))) {
        return false;
    }
    const double theta = wrap_two_pi(solution.theta_c);
    return theta >= 0.0 && theta < kTwoPi;
}

double hb_waveform(const HbSolution& solution, double t) {
    return solution.omega_c * t + solution.theta_c + 0.5 * std::numbers::pi -
           solution.beta_c * std::sin(solution.omega_c * t);
}

std::string solution_json(const HbSolution& solution, Formulation formulation, bool is_feasible) {
    nlohmann::ordered_json j;
    j["omega_c"] = solution.omega_c;
    j["beta_c"] = solution.beta_c;
    j["theta_c"] = solution.theta_c;
    j["residual_norm"] = solution.residual_norm;
    j["formulation"] = to_string(formulation);
    j["feasible"] = is_feasible;
    return j.dump(2);
}

}  // namespace pllhb
