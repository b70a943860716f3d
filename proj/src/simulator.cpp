#include "driftadapt/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "driftadapt/errors.hpp"

namespace driftadapt {

namespace {

// Bilinear story shear with kinematic hardening, split into an elastic
// spring alpha*k and an elastic-perfectly-plastic spring (1-alpha)*k with
// yield force (1-alpha)*k*dy.
struct StorySpring {
    double k = 0.0;
    double alpha = 0.0;
    double plastic_bound = 0.0;  // (1-alpha)*k*dy

    // Committed state.
    double drift = 0.0;
    double fh = 0.0;  // elastoplastic component force

    struct Trial {
        double force = 0.0;
        double tangent = 0.0;
        double fh = 0.0;
    };

    Trial evaluate(double new_drift) const {
        const double kh = (1.0 - alpha) * k;
        double fh_trial = fh + kh * (new_drift - drift);
        double tangent = k;
        if (fh_trial > plastic_bound) {
            fh_trial = plastic_bound;
            tangent = alpha * k;
        } else if (fh_trial < -plastic_bound) {
            fh_trial = -plastic_bound;
            tangent = alpha * k;
        }
        return {alpha * k * new_drift + fh_trial, tangent, fh_trial};
    }

    void commit(double new_drift, double new_fh) {
        drift = new_drift;
        fh = new_fh;
    }
};

struct AxisSystem {
    std::size_t n;
    Eigen::VectorXd mass;            // diagonal of M
    Eigen::MatrixXd elastic_k;       // tridiagonal elastic stiffness
    double ray_a0, ray_a1;           // C = a0 M + a1 K_el
    std::vector<StorySpring> springs;

    Eigen::VectorXd damping_force(const Eigen::VectorXd& v) const {
        return ray_a0 * mass.cwiseProduct(v) + ray_a1 * (elastic_k * v);
    }
};

AxisSystem build_system(const BuildingSpec& spec) {
    AxisSystem sys;
    sys.n = spec.n_stories;
    const auto n = static_cast<Eigen::Index>(spec.n_stories);
    sys.mass.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) sys.mass(i) = spec.mass[static_cast<std::size_t>(i)];
    sys.elastic_k = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        sys.elastic_k(i, i) += spec.stiffness[static_cast<std::size_t>(i)];
        if (i + 1 < n) {
            const double ku = spec.stiffness[static_cast<std::size_t>(i) + 1];
            sys.elastic_k(i, i) += ku;
            sys.elastic_k(i, i + 1) -= ku;
            sys.elastic_k(i + 1, i) -= ku;
        }
    }
    const auto ray = rayleigh_coefficients(spec);
    sys.ray_a0 = ray.a0;
    sys.ray_a1 = ray.a1;
    sys.springs.resize(spec.n_stories);
    for (std::size_t i = 0; i < spec.n_stories; ++i) {
        auto& s = sys.springs[i];
        s.k = spec.stiffness[i];
        s.alpha = spec.post_yield_ratio;
        s.plastic_bound = (1.0 - s.alpha) * s.k * spec.yield_disp[i];
    }
    return sys;
}

// Restoring force vector and tangent stiffness for displacement state u.
void assemble_restoring(const AxisSystem& sys, const Eigen::VectorXd& u,
                        std::vector<StorySpring::Trial>& trials, Eigen::VectorXd& f,
                        Eigen::MatrixXd& kt) {
    const auto n = static_cast<Eigen::Index>(sys.n);
    f.setZero(n);
    kt.setZero(n, n);
    for (std::size_t s = 0; s < sys.n; ++s) {
        const double lower = (s == 0) ? 0.0 : u(static_cast<Eigen::Index>(s) - 1);
        const double drift = u(static_cast<Eigen::Index>(s)) - lower;
        trials[s] = sys.springs[s].evaluate(drift);
        const auto i = static_cast<Eigen::Index>(s);
        f(i) += trials[s].force;
        kt(i, i) += trials[s].tangent;
        if (s > 0) {
            f(i - 1) -= trials[s].force;
            kt(i - 1, i - 1) += trials[s].tangent;
            kt(i - 1, i) -= trials[s].tangent;
            kt(i, i - 1) -= trials[s].tangent;
        }
    }
}

AxisHistory integrate_axis(const BuildingSpec& spec, const std::vector<double>& ground,
                           double dt, const SimulatorOptions& opt) {
    AxisSystem sys = build_system(spec);
    const auto n = static_cast<Eigen::Index>(sys.n);
    const std::size_t steps = ground.size();

    AxisHistory hist;
    hist.disp.assign(sys.n, std::vector<double>(steps, 0.0));
    hist.vel.assign(sys.n, std::vector<double>(steps, 0.0));
    hist.accel.assign(sys.n, std::vector<double>(steps, 0.0));
    hist.story_force.assign(sys.n, std::vector<double>(steps, 0.0));
    hist.ground_accel = ground;

    // Newmark constant-average-acceleration constants.
    const double beta = 0.25, gamma = 0.5;
    const double c0 = 1.0 / (beta * dt * dt);
    const double c2 = 1.0 / (beta * dt);
    const double c3 = 1.0 / (2.0 * beta) - 1.0;
    const double cg = gamma / (beta * dt);

    Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
    if (!opt.initial_displacement.empty()) {
        if (opt.initial_displacement.size() != sys.n) {
            throw std::invalid_argument("initial displacement size must match story count");
        }
        for (std::size_t i = 0; i < sys.n; ++i) u(static_cast<Eigen::Index>(i)) = opt.initial_displacement[i];
    }
    if (!opt.initial_velocity.empty()) {
        if (opt.initial_velocity.size() != sys.n) {
            throw std::invalid_argument("initial velocity size must match story count");
        }
        for (std::size_t i = 0; i < sys.n; ++i) v(static_cast<Eigen::Index>(i)) = opt.initial_velocity[i];
    }
    std::vector<StorySpring::Trial> trials(sys.n);
    Eigen::VectorXd fs(n);
    Eigen::MatrixXd kt(n, n);

    // Commit springs on the virgin branch at the initial drifts, then
    // find the consistent initial acceleration.
    assemble_restoring(sys, u, trials, fs, kt);
    for (std::size_t s = 0; s < sys.n; ++s) {
        const double lower = (s == 0) ? 0.0 : u(static_cast<Eigen::Index>(s) - 1);
        sys.springs[s].commit(u(static_cast<Eigen::Index>(s)) - lower, trials[s].fh);
    }
    a = (-(sys.mass.array() * ground[0]).matrix() - sys.damping_force(v) - fs).cwiseQuotient(sys.mass);

    for (std::size_t lvl = 0; lvl < sys.n; ++lvl) {
        const auto i = static_cast<Eigen::Index>(lvl);
        hist.disp[lvl][0] = u(i);
        hist.vel[lvl][0] = v(i);
        hist.accel[lvl][0] = a(i);
        hist.story_force[lvl][0] = trials[lvl].force;
    }

    for (std::size_t step = 1; step < steps; ++step) {
        const Eigen::VectorXd p_ext = -(sys.mass.array() * ground[step]).matrix();
        Eigen::VectorXd u_new = u;  // start from the committed state

        bool converged = false;
        for (std::size_t it = 0; it < opt.newton_max_iter; ++it) {
            const Eigen::VectorXd a_new = c0 * (u_new - u) - c2 * v - c3 * a;
            const Eigen::VectorXd v_new = v + dt * ((1.0 - gamma) * a + gamma * a_new);
            assemble_restoring(sys, u_new, trials, fs, kt);
            const Eigen::VectorXd residual =
                sys.mass.cwiseProduct(a_new) + sys.damping_force(v_new) + fs - p_ext;

            const double scale = std::max({p_ext.lpNorm<Eigen::Infinity>(),
                                           fs.lpNorm<Eigen::Infinity>(),
                                           sys.mass.cwiseProduct(a_new).lpNorm<Eigen::Infinity>(), 1.0});
            if (residual.lpNorm<Eigen::Infinity>() <= opt.newton_rel_tol * scale) {
                converged = true;
                break;
            }

            Eigen::MatrixXd jac = kt;
            jac += c0 * Eigen::MatrixXd(sys.mass.asDiagonal());
            jac += cg * (sys.ray_a0 * Eigen::MatrixXd(sys.mass.asDiagonal()) + sys.ray_a1 * sys.elastic_k);
            const Eigen::VectorXd du = jac.ldlt().solve(-residual);
            u_new += du;
            if (!u_new.allFinite()) {
                throw SimulationDiverged("non-finite displacement state", step);
            }
        }
        if (!converged) {
            throw SimulationDiverged("Newton iteration did not converge", step);
        }

        const Eigen::VectorXd a_new = c0 * (u_new - u) - c2 * v - c3 * a;
        const Eigen::VectorXd v_new = v + dt * ((1.0 - gamma) * a + gamma * a_new);
        if (!a_new.allFinite() || !v_new.allFinite()) {
            throw SimulationDiverged("non-finite velocity/acceleration state", step);
        }

        // Commit material states at the converged displacements.
        assemble_restoring(sys, u_new, trials, fs, kt);
        for (std::size_t s = 0; s < sys.n; ++s) {
            const double lower = (s == 0) ? 0.0 : u_new(static_cast<Eigen::Index>(s) - 1);
            const double drift = u_new(static_cast<Eigen::Index>(s)) - lower;
            sys.springs[s].commit(drift, trials[s].fh);
        }
        u = u_new;
        v = v_new;
        a = a_new;

        for (std::size_t lvl = 0; lvl < sys.n; ++lvl) {
            const auto i = static_cast<Eigen::Index>(lvl);
            hist.disp[lvl][step] = u(i);
            hist.vel[lvl][step] = v(i);
            hist.accel[lvl][step] = a(i);
            hist.story_force[lvl][step] = trials[lvl].force;
        }
    }
    return hist;
}

}  // namespace

SimulationDetail simulate_response_detailed(const BuildingSpec& building, const GroundMotion& motion,
                                            const SimulatorOptions& options) {
    building.validate();
    if (motion.n_steps < 2 || motion.accel_x.size() != motion.n_steps ||
        motion.accel_y.size() != motion.n_steps) {
        throw std::invalid_argument("motion arrays inconsistent with n_steps");
    }
    if (!(motion.dt > 0.0) || motion.dt > options.max_dt) {
        throw std::invalid_argument("motion dt must lie in (0, " + std::to_string(options.max_dt) + "] s");
    }

    SimulationDetail detail;
    detail.axis[0] = integrate_axis(building, motion.accel_x, motion.dt, options);
    detail.axis[1] = integrate_axis(building, motion.accel_y, motion.dt, options);

    auto& rec = detail.record;
    rec.building_id = building.id;
    rec.motion_id = motion.id;
    rec.dt = motion.dt;
    rec.n_steps = motion.n_steps;
    rec.n_stories = building.n_stories;
    rec.scale_factor = motion.scale_factor;
    for (int ax = 0; ax < 2; ++ax) {
        const auto& hist = detail.axis[ax];
        auto& acc = rec.abs_accel[ax];
        auto& drf = rec.drift[ax];
        acc.assign(building.n_stories + 1, std::vector<double>(motion.n_steps, 0.0));
        drf.assign(building.n_stories, std::vector<double>(motion.n_steps, 0.0));
        acc[0] = hist.ground_accel;  // level 0 moves with the ground
        for (std::size_t lvl = 1; lvl <= building.n_stories; ++lvl) {
            for (std::size_t t = 0; t < motion.n_steps; ++t) {
                acc[lvl][t] = hist.ground_accel[t] + hist.accel[lvl - 1][t];
            }
        }
        for (std::size_t s = 0; s < building.n_stories; ++s) {
            for (std::size_t t = 0; t < motion.n_steps; ++t) {
                const double lower = (s == 0) ? 0.0 : hist.disp[s - 1][t];
                drf[s][t] = hist.disp[s][t] - lower;
            }
        }
    }
    return detail;
}

ResponseRecord simulate_response(const BuildingSpec& building, const GroundMotion& motion,
                                 const SimulatorOptions& options) {
    return simulate_response_detailed(building, motion, options).record;
}

}  // namespace driftadapt
