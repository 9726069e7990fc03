#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

#include "m3p/dynamics.hpp"
#include "m3p/environment.hpp"
#include "m3p/types.hpp"

namespace m3p {

struct GaussianMode {
    double weight = 1.0;
    RobotState mean;
    Mat3 cov = Mat3::Identity();
    // Seconds during which this hypothesis has predicted different readings
    // than the sensor delivered (grows by dt, decays by 1 per agreeing step).
    double beta = 0.0;
};

class GmmBelief {
   public:
    GmmBelief() = default;
    explicit GmmBelief(std::vector<GaussianMode> modes) : modes_(std::move(modes)) {}

    std::vector<GaussianMode> &modes() { return modes_; }
    const std::vector<GaussianMode> &modes() const { return modes_; }
    std::size_t size() const { return modes_.size(); }
    bool empty() const { return modes_.empty(); }
    bool is_unimodal() const { return modes_.size() == 1; }
    GaussianMode &operator[](std::size_t i) { return modes_[i]; }
    const GaussianMode &operator[](std::size_t i) const { return modes_[i]; }

    double weight_sum() const {
        return std::accumulate(modes_.begin(), modes_.end(), 0.0,
                               [](double acc, const GaussianMode &m) { return acc + m.weight; });
    }

    void normalize() {
        const double total = weight_sum();
        if (!(total > 0.0) || !std::isfinite(total)) {
            throw DegenerateBeliefError("belief weights sum to " + std::to_string(total));
        }
        for (auto &m : modes_) m.weight /= total;
    }

    std::size_t most_likely() const {
        std::size_t best = 0;
        for (std::size_t i = 1; i < modes_.size(); ++i) {
            if (modes_[i].weight > modes_[best].weight) best = i;
        }
        return best;
    }

   private:
    std::vector<GaussianMode> modes_;
};

struct MatchedPair {
    Observation observed;
    Observation predicted;
};

struct AssociationResult {
    int n_z = 0;
    int n_h = 0;
    int n_matched = 0;
    std::vector<MatchedPair> pairs;  // ascending predicted index
    std::vector<std::size_t> unmatched_observed;
    std::vector<std::size_t> unmatched_predicted;
};

inline Vec2 innovation(const Observation &observed, const Observation &predicted) {
    return {observed.range - predicted.range, wrap_angle(observed.bearing - predicted.bearing)};
}

// Single-pair Mahalanobis distance under the observed reading's covariance.
inline double pair_mahalanobis_sq(const Observation &observed, const Observation &predicted) {
    const Vec2 nu = innovation(observed, predicted);
    return nu.dot(observed.noise_cov.ldlt().solve(nu));
}

// Pairs readings sharing an id. Among same-id candidates the globally
// smallest Mahalanobis distance is taken first; each reading is used once.
inline AssociationResult associate(const ObservationVector &predicted,
                                   const ObservationVector &observed) {
    AssociationResult result;
    result.n_z = static_cast<int>(observed.size());
    result.n_h = static_cast<int>(predicted.size());

    std::vector<std::tuple<double, std::size_t, std::size_t>> candidates;
    for (std::size_t p = 0; p < predicted.size(); ++p) {
        for (std::size_t o = 0; o < observed.size(); ++o) {
            if (predicted[p].landmark_id != observed[o].landmark_id) continue;
            candidates.emplace_back(pair_mahalanobis_sq(observed[o], predicted[p]), p, o);
        }
    }
    std::sort(candidates.begin(), candidates.end());

    std::vector<int> pred_to_obs(predicted.size(), -1);
    std::vector<bool> obs_used(observed.size(), false);
    for (const auto &[d2, p, o] : candidates) {
        if (pred_to_obs[p] >= 0 || obs_used[o]) continue;
        pred_to_obs[p] = static_cast<int>(o);
        obs_used[o] = true;
    }
    for (std::size_t p = 0; p < predicted.size(); ++p) {
        if (pred_to_obs[p] >= 0) {
            result.pairs.push_back({observed[static_cast<std::size_t>(pred_to_obs[p])], predicted[p]});
        } else {
            result.unmatched_predicted.push_back(p);
        }
    }
    for (std::size_t o = 0; o < observed.size(); ++o) {
        if (!obs_used[o]) result.unmatched_observed.push_back(o);
    }
    result.n_matched = static_cast<int>(result.pairs.size());
    return result;
}

// Stacked (z - h)^T R^-1 (z - h) over matched pairs; R block-diagonal from the
// observed readings. nullopt when nothing matched.
inline std::optional<double> mahalanobis_sq(const AssociationResult &assoc) {
    if (assoc.n_matched == 0) return std::nullopt;
    double total = 0.0;
    for (const auto &pair : assoc.pairs) total += pair_mahalanobis_sq(pair.observed, pair.predicted);
    return total;
}

struct WeightUpdateParams {
    double gamma_rate = 1e-4;
    // Added to D^2 for every reading one side confidently expected and the
    // other did not produce. Zero reproduces the matched-only likelihood.
    double miss_penalty = 9.210340371976184;
    // Position slack when deciding "confidently expected".
    double miss_margin = 0.3;
};

struct ModeEvidence {
    AssociationResult assoc;
    int negative = 0;
};

// Counts readings that contradict a hypothesis outright: landmarks it should
// certainly see but the sensor did not report, and sensed readings it cannot
// explain with any landmark it could plausibly see.
inline int negative_evidence(const Environment &env, const RobotState &mean,
                             const ObservationVector &predicted, const ObservationVector &observed,
                             const AssociationResult &assoc, double margin,
                             double gate = 13.815510557964274) {
    int count = 0;
    const Vec2 p = mean.position();
    for (const auto idx : assoc.unmatched_predicted) {
        const int li = predicted[idx].landmark_index;
        if (li < 0) continue;
        if (env.robustly_visible(p, env.landmarks()[static_cast<std::size_t>(li)], margin)) ++count;
    }
    if (assoc.unmatched_observed.empty()) return count;

    // A sensed reading is excused by an unpaired, plausibly visible landmark
    // of the same id whose predicted reading lies within `gate`, with the
    // position slack folded into the noise. Each landmark excuses one reading.
    std::vector<bool> used(env.landmarks().size(), false);
    for (const auto &pair : assoc.pairs) {
        if (pair.predicted.landmark_index >= 0) {
            used[static_cast<std::size_t>(pair.predicted.landmark_index)] = true;
        }
    }
    for (const auto idx : assoc.unmatched_observed) {
        const Observation &z = observed[idx];
        bool excused = false;
        for (std::size_t li = 0; li < env.landmarks().size() && !excused; ++li) {
            const Landmark &l = env.landmarks()[li];
            if (used[li] || l.id != z.landmark_id || !env.possibly_visible(p, l, margin)) continue;
            const Observation h = observe_landmark(env.sensor(), mean, l, static_cast<int>(li));
            Mat2 s = z.noise_cov;
            s(0, 0) += margin * margin;
            s(1, 1) += std::pow(margin / std::max(h.range, margin), 2);
            const Vec2 nu = innovation(z, h);
            if (nu.dot(s.ldlt().solve(nu)) <= gate) {
                used[li] = true;
                excused = true;
            }
        }
        if (!excused) ++count;
    }
    return count;
}

// Likelihood reweighting followed by the duration factor gamma.
// w'_i ∝ w_i exp(-D_i^2 / 2), evaluated with a shift by min D^2; then when a
// mode's predicted and sensed readings disagree in count or association,
// alpha = max(1 + n_z - n_zh, 1 + n_h - n_zh), beta += dt and
// gamma = exp(-gamma_rate * alpha * beta); otherwise beta = max(0, beta - 1).
// A final renormalization keeps the weights summing to one.
inline GmmBelief update_weights(const GmmBelief &belief, std::span<const ModeEvidence> evidence,
                                double dt, const WeightUpdateParams &params = {}) {
    if (evidence.size() != belief.size()) throw Error("update_weights: evidence size mismatch");
    const std::size_t n = belief.size();
    std::vector<double> d2(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        d2[i] = mahalanobis_sq(evidence[i].assoc).value_or(0.0) +
                params.miss_penalty * evidence[i].negative;
    }
    const double min_d2 = n == 0 ? 0.0 : *std::min_element(d2.begin(), d2.end());

    GmmBelief out = belief;
    for (std::size_t i = 0; i < n; ++i) {
        out[i].weight = belief[i].weight * std::exp(-0.5 * (d2[i] - min_d2));
    }
    out.normalize();

    for (std::size_t i = 0; i < n; ++i) {
        const auto &a = evidence[i].assoc;
        auto &mode = out[i];
        double gamma = 1.0;
        if (a.n_h != a.n_z || a.n_h != a.n_matched) {
            const int alpha = std::max(1 + a.n_z - a.n_matched, 1 + a.n_h - a.n_matched);
            mode.beta += dt;
            gamma = std::exp(-params.gamma_rate * alpha * mode.beta);
        } else {
            mode.beta = std::max(0.0, mode.beta - 1.0);
        }
        mode.weight *= gamma;
    }
    out.normalize();
    return out;
}

// Drops modes below threshold; the heaviest mode always survives.
inline GmmBelief prune(const GmmBelief &belief, double threshold) {
    if (belief.empty()) return belief;
    std::vector<GaussianMode> kept;
    for (const auto &m : belief.modes()) {
        if (m.weight >= threshold) kept.push_back(m);
    }
    if (kept.empty()) kept.push_back(belief[belief.most_likely()]);
    GmmBelief out(std::move(kept));
    out.normalize();
    return out;
}

// Folds modes whose means coincide within the given tolerances into the
// heavier one (weights add). Used while the initial belief settles, where many
// samples converge onto the same pose.
inline GmmBelief merge_coincident(const GmmBelief &belief, double distance, double angle) {
    std::vector<std::size_t> order(belief.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return belief[a].weight > belief[b].weight;
    });
    std::vector<GaussianMode> kept;
    std::vector<std::size_t> kept_source;
    for (const auto i : order) {
        const auto &m = belief[i];
        bool absorbed = false;
        for (auto &k : kept) {
            if ((k.mean.position() - m.mean.position()).norm() <= distance &&
                std::abs(wrap_angle(k.mean.theta - m.mean.theta)) <= angle) {
                k.weight += m.weight;
                absorbed = true;
                break;
            }
        }
        if (!absorbed) {
            kept.push_back(m);
            kept_source.push_back(i);
        }
    }
    // Restore original relative order for determinism of downstream indexing.
    std::vector<std::size_t> idx(kept.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return kept_source[a] < kept_source[b]; });
    std::vector<GaussianMode> ordered;
    ordered.reserve(kept.size());
    for (const auto i : idx) ordered.push_back(kept[i]);
    return GmmBelief(std::move(ordered));
}

struct FilterParams {
    double dt = 0.1;
    Mat2 process_cov = (Mat2() << 1e-4, 0.0, 0.0, 1e-4).finished();
    // Per-pair innovation gate; pairs above it do not correct the mean.
    // Non-positive disables gating.
    double gate = 13.815510557964274;  // chi-square, 2 dof, 0.999
    int iterations = 1;
};

inline void symmetrize(Mat3 &m) { m = 0.5 * (m + m.transpose()).eval(); }

inline GaussianMode ekf_predict(const GaussianMode &mode, const Control &u,
                                const FilterParams &params) {
    GaussianMode out = mode;
    const auto jac = motion_jacobians(mode.mean, u, params.dt);
    out.mean = propagate(mode.mean, u, params.dt);
    out.cov = jac.state * mode.cov * jac.state.transpose() +
              jac.noise * params.process_cov * jac.noise.transpose();
    symmetrize(out.cov);
    return out;
}

// Iterated EKF correction over the matched pairs (iterations == 1 is the plain
// EKF) with Joseph-form covariance.
inline GaussianMode ekf_update(const Environment &env, const GaussianMode &mode,
                               const AssociationResult &assoc, const FilterParams &params) {
    if (assoc.n_matched == 0) throw Error("ekf_update: no matched readings");
    std::vector<const MatchedPair *> used;
    for (const auto &pair : assoc.pairs) {
        const int li = pair.predicted.landmark_index;
        if (li < 0) continue;
        const auto &landmark = env.landmarks()[static_cast<std::size_t>(li)];
        if ((landmark.position - mode.mean.position()).norm() <= kMinLandmarkDistance) continue;
        if (params.gate > 0.0) {
            const Mat23 h = obs_jacobian(mode.mean, landmark);
            const Mat2 s = h * mode.cov * h.transpose() + pair.observed.noise_cov;
            const Vec2 nu = innovation(pair.observed, pair.predicted);
            if (nu.dot(s.ldlt().solve(nu)) > params.gate) continue;
        }
        used.push_back(&pair);
    }
    if (used.empty()) return mode;

    const auto m = static_cast<Eigen::Index>(2 * used.size());
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd z(m);
    for (std::size_t k = 0; k < used.size(); ++k) {
        const auto row = static_cast<Eigen::Index>(2 * k);
        r.block<2, 2>(row, row) = used[k]->observed.noise_cov;
        z(row) = used[k]->observed.range;
        z(row + 1) = used[k]->observed.bearing;
    }

    const Vec3 prior = mode.mean.vec();
    Vec3 x = prior;
    Eigen::MatrixXd h(m, 3);
    Eigen::MatrixXd gain;
    const int iterations = std::max(1, params.iterations);
    for (int it = 0; it < iterations; ++it) {
        const RobotState xs = RobotState::from_vec(x);
        Eigen::VectorXd resid(m);
        for (std::size_t k = 0; k < used.size(); ++k) {
            const auto row = static_cast<Eigen::Index>(2 * k);
            const auto &landmark =
                env.landmarks()[static_cast<std::size_t>(used[k]->predicted.landmark_index)];
            const Vec2 d = landmark.position - xs.position();
            if (d.norm() <= kMinLandmarkDistance) {
                throw FilterDegeneracyError("iterate collapsed onto a landmark");
            }
            h.block<2, 3>(row, 0) = obs_jacobian(xs, landmark);
            resid(row) = z(row) - d.norm();
            resid(row + 1) = wrap_angle(z(row + 1) - (std::atan2(d.y(), d.x()) - xs.theta));
        }
        const Eigen::MatrixXd s = h * mode.cov * h.transpose() + r;
        Eigen::LLT<Eigen::MatrixXd> llt(s);
        if (llt.info() != Eigen::Success) {
            throw FilterDegeneracyError("innovation covariance not positive definite");
        }
        gain = mode.cov * h.transpose() * llt.solve(Eigen::MatrixXd::Identity(m, m));
        Vec3 dx = x - prior;
        dx.z() = wrap_angle(dx.z());
        Vec3 next = prior + gain * (resid + h * dx);
        next.z() = wrap_angle(next.z());
        const bool converged = (next - x).head<2>().norm() < 1e-9 &&
                               std::abs(wrap_angle(next.z() - x.z())) < 1e-9;
        x = next;
        if (converged) break;
    }

    GaussianMode out = mode;
    out.mean = RobotState::from_vec(x);
    const Mat3 i_kh = Mat3::Identity() - gain * h;
    out.cov = i_kh * mode.cov * i_kh.transpose() + gain * r * gain.transpose();
    symmetrize(out.cov);
    return out;
}

struct BeliefParams {
    FilterParams filter;
    WeightUpdateParams weights;
    double prune_threshold = 0.01;
};

struct StepDiagnostics {
    std::vector<ModeEvidence> evidence;
};

inline ModeEvidence gather_evidence(const Environment &env, const RobotState &mean,
                                    const ObservationVector &observed,
                                    const WeightUpdateParams &params) {
    const ObservationVector predicted = predict_observation(env, mean);
    ModeEvidence e;
    e.assoc = associate(predicted, observed);
    if (params.miss_penalty != 0.0) {
        e.negative =
            negative_evidence(env, mean, predicted, observed, e.assoc, params.miss_margin);
    }
    return e;
}

// One filtering step of the whole mixture: per-mode EKF prediction, weight
// update against the predicted readings, per-mode correction, pruning.
inline GmmBelief belief_step(const Environment &env, const GmmBelief &belief, const Control &u,
                             const ObservationVector &z, const BeliefParams &params,
                             StepDiagnostics *diag = nullptr) {
    GmmBelief predicted;
    predicted.modes().reserve(belief.size());
    for (const auto &m : belief.modes()) predicted.modes().push_back(ekf_predict(m, u, params.filter));

    std::vector<ModeEvidence> evidence;
    evidence.reserve(predicted.size());
    for (const auto &m : predicted.modes()) {
        evidence.push_back(gather_evidence(env, m.mean, z, params.weights));
    }
    GmmBelief weighted = update_weights(predicted, evidence, params.filter.dt, params.weights);
    for (std::size_t i = 0; i < weighted.size(); ++i) {
        if (evidence[i].assoc.n_matched == 0) continue;
        const double w = weighted[i].weight;
        const double beta = weighted[i].beta;
        weighted[i] = ekf_update(env, weighted[i], evidence[i].assoc, params.filter);
        weighted[i].weight = w;
        weighted[i].beta = beta;
    }
    if (diag) diag->evidence = std::move(evidence);
    return prune(weighted, params.prune_threshold);
}

struct InitialBeliefParams {
    int samples = 200;
    Mat3 cov = (Mat3() << 0.25, 0.0, 0.0, 0.0, 0.25, 0.0, 0.0, 0.0,
                std::pow(10.0 * kPi / 180.0, 2))
                   .finished();
    int sweep_steps = 63;  // one full in-place turn at the default turn rate
    int stable_rounds = 5;
    int max_rounds = 40;
    int tries_per_sample = 1000;
    int iterations = 10;
    double merge_distance = 0.3;
    double merge_angle = 0.3;
};

// Sensing callback: performs one motion step on the real robot and reports the
// applied control and the readings that followed it.
using SensingFn = std::function<std::pair<Control, ObservationVector>()>;

template <typename Rng>
std::vector<RobotState> sample_valid_states(const Environment &env, int count, int tries_per_sample,
                                            Rng &rng) {
    std::uniform_real_distribution<double> ux(env.bounds().min.x(), env.bounds().max.x());
    std::uniform_real_distribution<double> uy(env.bounds().min.y(), env.bounds().max.y());
    std::uniform_real_distribution<double> ut(-kPi, kPi);
    std::vector<RobotState> out;
    const long long budget = static_cast<long long>(count) * tries_per_sample;
    long long tries = 0;
    while (static_cast<int>(out.size()) < count && tries < budget) {
        ++tries;
        const RobotState s{ux(rng), uy(rng), wrap_angle(ut(rng))};
        if (env.is_state_valid(s)) out.push_back(s);
    }
    if (out.empty()) throw SamplingError("no valid state found while sampling the initial belief");
    return out;
}

// One settling step of the initial belief: modes are corrected first (iterated,
// ungated) and then scored at the corrected mean, so hypotheses that converge
// onto a consistent pose compete on equal terms regardless of how far their seed
// sample was from it.
inline GmmBelief settle_step(const Environment &env, const GmmBelief &belief, const Control &u,
                             const ObservationVector &z, const BeliefParams &params,
                             const InitialBeliefParams &init) {
    FilterParams refine = params.filter;
    refine.gate = 0.0;
    refine.iterations = init.iterations;

    GmmBelief moved;
    moved.modes().reserve(belief.size());
    for (const auto &m : belief.modes()) {
        GaussianMode p = ekf_predict(m, u, params.filter);
        const auto assoc = associate(predict_observation(env, p.mean), z);
        if (assoc.n_matched > 0) {
            try {
                GaussianMode c = ekf_update(env, p, assoc, refine);
                if (env.is_state_valid(c.mean)) p = c;
            } catch (const FilterDegeneracyError &) {
            }
        }
        moved.modes().push_back(p);
    }
    std::vector<ModeEvidence> evidence;
    evidence.reserve(moved.size());
    for (const auto &m : moved.modes()) {
        evidence.push_back(gather_evidence(env, m.mean, z, params.weights));
    }
    GmmBelief weighted = update_weights(moved, evidence, params.filter.dt, params.weights);
    weighted = merge_coincident(weighted, init.merge_distance, init.merge_angle);
    return prune(weighted, params.prune_threshold);
}

// Uniformly seeded mixture, settled by repeated sensing until the number of
// modes stays fixed for `stable_rounds` consecutive rounds.
template <typename Rng>
GmmBelief sample_initial_belief(const Environment &env, const InitialBeliefParams &init,
                                const SensingFn &sense, const BeliefParams &params, Rng &rng,
                                const std::function<void(const GmmBelief &)> &on_step = {}) {
    if (init.samples < 1) throw SamplingError("need at least one sample");
    if (Eigen::LLT<Mat3>(init.cov).info() != Eigen::Success) {
        throw SamplingError("initial covariance must be SPD");
    }
    const auto seeds = sample_valid_states(env, init.samples, init.tries_per_sample, rng);
    std::vector<GaussianMode> modes;
    modes.reserve(seeds.size());
    for (const auto &s : seeds) {
        modes.push_back({1.0 / static_cast<double>(seeds.size()), s, init.cov, 0.0});
    }
    GmmBelief belief(std::move(modes));

    std::size_t last_count = belief.size();
    int unchanged = 0;
    for (int round = 0; round < init.max_rounds && unchanged < init.stable_rounds; ++round) {
        for (int k = 0; k < init.sweep_steps; ++k) {
            const auto [u, z] = sense();
            belief = settle_step(env, belief, u, z, params, init);
            if (on_step) on_step(belief);
        }
        if (belief.size() == last_count) {
            ++unchanged;
        } else {
            unchanged = 0;
            last_count = belief.size();
        }
    }
    return belief;
}

struct InnovationRecord {
    double nis = 0.0;
    int dof = 0;
    bool association_failed = false;
};

inline double chi_square_quantile(int dof, double p) {
    boost::math::chi_squared dist(static_cast<double>(dof));
    return boost::math::quantile(dist, p);
}

// Normalized innovation squared of a unimodal filter against its matched readings.
inline InnovationRecord innovation_record(const Environment &env, const GaussianMode &mode,
                                          const AssociationResult &assoc) {
    InnovationRecord rec;
    rec.association_failed = assoc.n_matched < std::min(assoc.n_z, assoc.n_h);
    if (assoc.n_matched == 0) return rec;
    const auto m = static_cast<Eigen::Index>(2 * assoc.pairs.size());
    Eigen::MatrixXd h(m, 3);
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd nu(m);
    for (std::size_t k = 0; k < assoc.pairs.size(); ++k) {
        const auto row = static_cast<Eigen::Index>(2 * k);
        const auto &pair = assoc.pairs[k];
        const auto &landmark =
            env.landmarks()[static_cast<std::size_t>(pair.predicted.landmark_index)];
        h.block<2, 3>(row, 0) = obs_jacobian(mode.mean, landmark);
        r.block<2, 2>(row, row) = pair.observed.noise_cov;
        nu.segment<2>(row) = innovation(pair.observed, pair.predicted);
    }
    const Eigen::MatrixXd s = h * mode.cov * h.transpose() + r;
    rec.nis = nu.dot(s.ldlt().solve(nu));
    rec.dof = static_cast<int>(m);
    return rec;
}

// True when the last `window` records all show either an innovation beyond the
// chi-square quantile or a failed id association.
inline bool detect_lost(std::span<const InnovationRecord> history, int window,
                        double quantile = 0.999) {
    if (window <= 0 || history.size() < static_cast<std::size_t>(window)) return false;
    const auto recent = history.last(static_cast<std::size_t>(window));
    const bool nis_exceeded = std::all_of(recent.begin(), recent.end(), [&](const auto &r) {
        return r.dof > 0 && r.nis > chi_square_quantile(r.dof, quantile);
    });
    const bool association_failed = std::all_of(
        recent.begin(), recent.end(), [](const auto &r) { return r.association_failed; });
    return nis_exceeded || association_failed;
}

}  // namespace m3p
