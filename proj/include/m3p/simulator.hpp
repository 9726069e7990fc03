#pragma once

#include <cstdint>
#include <random>

#include "m3p/dynamics.hpp"
#include "m3p/scenario.hpp"

namespace m3p {

struct SimStep {
    RobotState truth;
    ObservationVector z;
    bool collided = false;
    bool kidnapped = false;
};

// Ground truth. One instance per run; all randomness comes from its own stream.
class SimWorld {
   public:
    SimWorld(const Environment &env, const RobotState &start, const Mat2 &process_cov,
             double dt, KidnapConfig kidnap, std::uint64_t seed)
        : env_(&env),
          truth_(start),
          dt_(dt),
          kidnap_(std::move(kidnap)),
          rng_(seed),
          sv_(std::sqrt(std::max(0.0, process_cov(0, 0)))),
          sw_(std::sqrt(std::max(0.0, process_cov(1, 1)))) {}

    SimWorld(const Scenario &sc, std::uint64_t seed)
        : SimWorld(sc.env, sc.start, sc.process_cov, sc.planner.dt, sc.kidnap, seed) {}

    const RobotState &truth() const { return truth_; }
    int clock() const { return clock_; }
    bool kidnap_done() const { return kidnap_done_; }
    const Environment &env() const { return *env_; }

    // Readings equal to the noise-free prediction, covariance still attached.
    void set_noiseless_sensing(bool on) { noiseless_ = on; }

    // Noisy motion, optional teleport, then a noisy reading of the new truth.
    SimStep step(const Control &u) {
        std::normal_distribution<double> unit(0.0, 1.0);
        const double nv = unit(rng_);
        const double nw = unit(rng_);
        truth_ = propagate(truth_, u, ProcessNoise{sv_ * nv, sw_ * nw}, dt_);
        ++clock_;

        SimStep out;
        out.collided = !env_->is_state_valid(truth_);
        if (!out.collided && kidnap_triggered()) {
            truth_ = kidnap_.destination;
            kidnap_done_ = true;
            out.kidnapped = true;
        }
        out.truth = truth_;
        if (noiseless_) {
            out.z = predict_observation(*env_, truth_);
            for (auto &z : out.z) z.landmark_index = -1;
        } else {
            out.z = sample_observation(*env_, truth_, rng_);
        }
        return out;
    }

    // Noise-free reading of the current truth, without advancing the clock.
    ObservationVector sense_noiseless() const { return predict_observation(*env_, truth_); }

   private:
    bool kidnap_triggered() const {
        if (!kidnap_.enabled || kidnap_done_) return false;
        if (kidnap_.time_step && clock_ == *kidnap_.time_step) return true;
        if (kidnap_.trigger_region) {
            const auto &c = *kidnap_.trigger_region;
            if ((truth_.position() - c.center).norm() <= c.radius) return true;
        }
        return false;
    }

    const Environment *env_;
    RobotState truth_;
    double dt_;
    KidnapConfig kidnap_;
    std::mt19937_64 rng_;
    double sv_;
    double sw_;
    int clock_ = 0;
    bool kidnap_done_ = false;
    bool noiseless_ = false;
};

}  // namespace m3p
