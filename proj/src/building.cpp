#include "driftadapt/building.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace driftadapt {

namespace {
constexpr double kPi = 3.14159265358979323846;

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}
}  // namespace

void BuildingSpec::validate() const {
    require(n_stories >= 1, "building needs at least one story");
    require(mass.size() == n_stories, "mass array size != n_stories");
    require(height.size() == n_stories, "height array size != n_stories");
    require(stiffness.size() == n_stories, "stiffness array size != n_stories");
    require(yield_disp.size() == n_stories, "yield_disp array size != n_stories");
    for (std::size_t i = 0; i < n_stories; ++i) {
        require(mass[i] > 0.0, "story mass must be > 0");
        require(height[i] > 0.0, "story height must be > 0");
        require(stiffness[i] > 0.0, "story stiffness must be > 0");
        require(yield_disp[i] > 0.0, "story yield displacement must be > 0");
    }
    require(post_yield_ratio >= 0.0 && post_yield_ratio < 1.0, "post-yield ratio must lie in [0, 1)");
    require(damping_ratio > 0.0 && damping_ratio <= 0.2, "damping ratio must lie in (0, 0.2]");
    require(damping_anchor_hz_low > 0.0, "low damping anchor must be > 0");
    require(damping_anchor_hz_high > damping_anchor_hz_low, "damping anchors must be strictly increasing");
}

std::vector<double> modal_frequencies_hz(const BuildingSpec& spec) {
    const auto n = static_cast<Eigen::Index>(spec.n_stories);
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        k(i, i) += spec.stiffness[static_cast<std::size_t>(i)];
        if (i + 1 < n) {
            const double ku = spec.stiffness[static_cast<std::size_t>(i) + 1];
            k(i, i) += ku;
            k(i, i + 1) -= ku;
            k(i + 1, i) -= ku;
        }
    }
    // Symmetric whitening by the diagonal mass matrix.
    Eigen::VectorXd inv_sqrt_m(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        inv_sqrt_m(i) = 1.0 / std::sqrt(spec.mass[static_cast<std::size_t>(i)]);
    }
    const Eigen::MatrixXd a = inv_sqrt_m.asDiagonal() * k * inv_sqrt_m.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
    std::vector<double> freqs;
    freqs.reserve(spec.n_stories);
    for (Eigen::Index i = 0; i < n; ++i) {
        freqs.push_back(std::sqrt(std::max(0.0, solver.eigenvalues()(i))) / (2.0 * kPi));
    }
    return freqs;
}

RayleighCoefficients rayleigh_coefficients(const BuildingSpec& spec) {
    const double wa = 2.0 * kPi * spec.damping_anchor_hz_low;
    const double wb = 2.0 * kPi * spec.damping_anchor_hz_high;
    const double z = spec.damping_ratio;
    return {2.0 * z * wa * wb / (wa + wb), 2.0 * z / (wa + wb)};
}

BuildingSpec make_uniform_building(const std::string& id, std::size_t n_stories, double story_mass,
                                   double story_height, double story_stiffness, double yield_disp,
                                   double post_yield_ratio, double damping_ratio) {
    BuildingSpec spec;
    spec.id = id;
    spec.n_stories = n_stories;
    spec.mass.assign(n_stories, story_mass);
    spec.height.assign(n_stories, story_height);
    spec.stiffness.assign(n_stories, story_stiffness);
    spec.yield_disp.assign(n_stories, yield_disp);
    spec.post_yield_ratio = post_yield_ratio;
    spec.damping_ratio = damping_ratio;
    spec.damping_anchor_hz_low = 1.0;  // placeholder until modes are known
    spec.damping_anchor_hz_high = 2.0;
    const auto freqs = modal_frequencies_hz(spec);
    spec.damping_anchor_hz_low = freqs.front();
    spec.damping_anchor_hz_high = (freqs.size() >= 3) ? freqs[2] : 3.0 * freqs.front();
    spec.validate();
    return spec;
}

}  // namespace driftadapt
