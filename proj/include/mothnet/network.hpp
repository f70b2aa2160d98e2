#pragma once
// MothNet network generation and single-presentation simulation.
//
// A NetworkTemplate holds every architectural and learning hyperparameter;
// concrete moths (NetworkInstance) are drawn from a template with a seed.
// One stimulus presentation runs the antennal lobe (AL) as a noisy
// firing-rate SDE with lateral inhibition, time-averages the readout window,
// sparsifies the mushroom body (MB) with exact k-winners-take-all, and reads
// out one extrinsic neuron (EN) per class through a gentle sigmoid.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mothnet/rng.hpp"
#include "mothnet/sde.hpp"

namespace mothnet {

/* Learning-rate normalization: goal == kReferenceGoal leaves the template's
 * base rates unchanged; smaller goal (fewer exposures to peak) scales them
 * up, larger goal scales them down. */
inline constexpr double kReferenceGoal = 15.0;

/* EN responses at or below this fraction of en_sigmoid.max_rate count as
 * silent (the naive network's response to an empty stimulus). */
inline constexpr double kEnSilenceFraction = 0.02;

struct NetworkTemplate {
    int n_features = 85;  // AL units; 85 for vMNIST, 200 for Omniglot
    int mb_ratio = 30;    // MB size = mb_ratio * n_features
    int n_classes = 10;   // one EN per class

    double al_lateral_inhibition_strength = 0.01;
    double al_mb_connection_prob = 0.15;
    double weight_init_low = 0.1;
    double weight_init_high = 0.3;

    double sparsity_fraction = 0.15;           // MB fraction active outside training
    double sparsity_fraction_training = 0.15;  // same, during octopamine-on windows
    double octopamine_level = 0.5;             // additive AL drive during training
    bool octopamine_to_mb = false;             // optionally stimulate MB drive too
    double noise_amplitude_al = 0.1;

    double growth_rate_pre = 0.002;  // gamma, AL->MB (essentially fixed by default)
    double growth_rate_post = 0.07;  // gamma, MB->EN, at goal == kReferenceGoal
    double decay_rate_post = 0.06;   // delta, MB->EN, at goal == kReferenceGoal
    double weight_max = 1.0;
    double goal = 15.0;  // expected exposures to peak accuracy; scales gamma/delta
    int n_sniffs = 1;    // repeated presentations per training sample

    /* Integration and presentation timing. */
    double tau = 1.0;
    double dt = 0.05;
    double presentation_window = 2.0;  // stimulus-on duration, in units of tau=1
    double readout_window = 1.0;       // trailing span averaged for the readout

    SigmoidParams al_sigmoid{1.0, 4.0, 0.35};
    SigmoidParams mb_sigmoid{1.0, 5.0, 0.9};
    SigmoidParams en_sigmoid{1.0, 0.08, 55.0};

    int n_mb() const { return mb_ratio * n_features; }

    double effective_growth_pre() const { return growth_rate_pre * kReferenceGoal / goal; }
    double effective_growth_post() const { return growth_rate_post * kReferenceGoal / goal; }
    double effective_decay_post() const { return decay_rate_post * kReferenceGoal / goal; }

    SdeParams al_sde() const { return SdeParams{tau, dt, noise_amplitude_al}; }

    void validate() const {
        auto fail = [](const std::string& msg) { throw std::invalid_argument("NetworkTemplate: " + msg); };
        if (n_features < 1) fail("n_features must be >= 1");
        if (mb_ratio < 1) fail("mb_ratio must be >= 1");
        if (n_classes < 2) fail("n_classes must be >= 2");
        if (!(al_lateral_inhibition_strength >= 0)) fail("al_lateral_inhibition_strength must be >= 0");
        if (!(al_mb_connection_prob >= 0 && al_mb_connection_prob <= 1))
            fail("al_mb_connection_prob must be in [0, 1]");
        if (!(weight_init_low >= 0) || !(weight_init_high >= weight_init_low))
            fail("weight_init range must satisfy 0 <= low <= high");
        if (!(sparsity_fraction > 0 && sparsity_fraction <= 0.5))
            fail("sparsity_fraction must be in (0, 0.5]");
        if (!(sparsity_fraction_training > 0 && sparsity_fraction_training <= 0.5))
            fail("sparsity_fraction_training must be in (0, 0.5]");
        if (!(octopamine_level >= 0)) fail("octopamine_level must be >= 0");
        if (!(noise_amplitude_al >= 0)) fail("noise_amplitude_al must be >= 0");
        if (!(growth_rate_pre >= 0)) fail("growth_rate_pre must be >= 0");
        if (!(growth_rate_post > 0)) fail("growth_rate_post must be > 0");
        if (!(decay_rate_post >= 0 && decay_rate_post < 1)) fail("decay_rate_post must be in [0, 1)");
        if (!(weight_max > weight_init_high)) fail("weight_max must be > weight_init_high");
        if (!(goal > 0)) fail("goal must be > 0");
        if (!(effective_decay_post() < 1))
            fail("goal-scaled decay rate reaches 1; raise goal or lower decay_rate_post");
        if (n_sniffs < 1) fail("n_sniffs must be >= 1");
        if (!(readout_window <= presentation_window))
            fail("readout_window must be <= presentation_window");
        if (!(readout_window >= dt)) fail("readout_window must be >= dt");
        al_sde().validate();
        al_sigmoid.validate();
        mb_sigmoid.validate();
        en_sigmoid.validate();
    }
};

struct NetworkInstance {
    NetworkTemplate tpl;
    std::uint64_t seed = 0;

    Matrix w_al_mb;      // n_mb x n_features, plastic; zero off the fixed pattern
    Matrix al_mb_mask;   // 0/1 connectivity pattern, fixed for the instance lifetime
    Matrix w_mb_en;      // n_classes x n_mb, plastic, rails [0, weight_max]
    Matrix al_inhibition;  // n_features x n_features, zero diagonal

    /* en_class_assignment[e] = class targeted by EN e (a permutation). */
    std::vector<int> en_class_assignment;

    int en_for_class(int cls) const {
        for (int e = 0; e < static_cast<int>(en_class_assignment.size()); e++)
            if (en_class_assignment[e] == cls) return e;
        throw std::invalid_argument("en_for_class: unknown class " + std::to_string(cls));
    }

    double en_silence_threshold() const { return kEnSilenceFraction * tpl.en_sigmoid.max_rate; }
};

enum class Phase { Baseline, Training, Validation };

/* Scalar readout of every EN for one presented sample. responses[j] is the
 * response of the EN assigned to class j, so indices are class-aligned for
 * the classifiers. */
struct EnResponseRecord {
    Vector responses;
    int sample_class = -1;
    Phase phase = Phase::Baseline;
};

/* Readout-window mean activities, retained for the plasticity update. */
struct PresentationSummary {
    Vector al_mean;   // mean AL rates over the readout window
    Vector mb_rates;  // sparse MB activity (post k-WTA)
};

/* Draw a concrete moth. Sampling order is fixed (AL->MB mask row-major, then
 * nonzero weights, then the shared EN row, then the class assignment), so a
 * seed fully determines the instance. */
inline NetworkInstance generate_instance(const NetworkTemplate& tpl, std::uint64_t seed) {
    tpl.validate();
    const int n_mb = tpl.n_mb();
    const int n_f = tpl.n_features;

    NetworkInstance inst;
    inst.tpl = tpl;
    inst.seed = seed;
    Rng rng(derive_seed(seed, "generate"));

    inst.al_mb_mask.resize(n_mb, n_f);
    inst.w_al_mb.resize(n_mb, n_f);
    for (int i = 0; i < n_mb; i++) {
        for (int j = 0; j < n_f; j++) {
            bool connected = rng.bernoulli(tpl.al_mb_connection_prob);
            inst.al_mb_mask(i, j) = connected ? 1.0 : 0.0;
            inst.w_al_mb(i, j) =
                connected ? rng.uniform(tpl.weight_init_low, tpl.weight_init_high) : 0.0;
        }
    }
    if (inst.al_mb_mask.sum() == 0.0)
        throw std::runtime_error("generate_instance: all-zero AL->MB connectivity");

    /* ENs start indistinguishable: one row drawn, copied to every class. */
    inst.w_mb_en.resize(tpl.n_classes, n_mb);
    for (int m = 0; m < n_mb; m++)
        inst.w_mb_en(0, m) = rng.uniform(tpl.weight_init_low, tpl.weight_init_high);
    for (int c = 1; c < tpl.n_classes; c++) inst.w_mb_en.row(c) = inst.w_mb_en.row(0);

    inst.al_inhibition = Matrix::Constant(n_f, n_f, tpl.al_lateral_inhibition_strength);
    inst.al_inhibition.diagonal().setZero();

    inst.en_class_assignment.resize(tpl.n_classes);
    std::iota(inst.en_class_assignment.begin(), inst.en_class_assignment.end(), 0);
    rng.shuffle(inst.en_class_assignment);

    return inst;
}

/* Simulate the AL over the presentation window. Per-unit drive is
 * feature_i - sum_j inhibition_ij * x_j, plus a uniform octopamine term when
 * octopamine > 0. Returns the full trajectory (initial state first). */
inline std::vector<LayerState> al_forward(const Vector& features, const NetworkInstance& inst,
                                          double octopamine, Rng& rng) {
    if (features.size() != inst.tpl.n_features)
        throw std::invalid_argument("al_forward: feature vector length != n_features");
    if (!features.allFinite() || (features.array() < 0.0).any())
        throw std::invalid_argument("al_forward: features must be finite and >= 0");

    const SdeParams sde = inst.tpl.al_sde();
    const auto n_steps =
        static_cast<std::size_t>(std::llround(inst.tpl.presentation_window / sde.dt));
    std::vector<LayerState> traj;
    traj.reserve(n_steps + 1);
    traj.push_back(LayerState::zeros(features.size()));
    Vector drive(features.size());
    for (std::size_t k = 0; k < n_steps; k++) {
        drive = features - inst.al_inhibition * traj.back().rates;
        if (octopamine > 0.0) drive.array() += octopamine;
        traj.push_back(euler_maruyama_step(traj.back(), drive, sde, inst.tpl.al_sigmoid, rng));
    }
    return traj;
}

/* MB response to (time-averaged) AL rates: sigmoid of the weighted drive,
 * then exact k-winners-take-all with k = ceil(sparsity * n_mb). All but the k
 * largest responses are set to exactly 0; ties keep the lowest index. */
inline LayerState mb_forward(const Vector& al_rates, const NetworkInstance& inst, double sparsity,
                             double octopamine = 0.0) {
    if (!(sparsity > 0.0 && sparsity <= 1.0))
        throw std::invalid_argument("mb_forward: sparsity must be in (0, 1]");
    if (al_rates.size() != inst.tpl.n_features)
        throw std::invalid_argument("mb_forward: AL rate vector length != n_features");

    Vector drive = inst.w_al_mb * al_rates;
    if (inst.tpl.octopamine_to_mb && octopamine > 0.0) drive.array() += octopamine;
    Vector rates = sigmoid(drive, inst.tpl.mb_sigmoid);

    const auto n = rates.size();
    const auto k = static_cast<Eigen::Index>(std::ceil(sparsity * static_cast<double>(n)));
    if (k >= n) return LayerState(std::move(rates));

    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::nth_element(order.begin(), order.begin() + k, order.end(),
                     [&](Eigen::Index a, Eigen::Index b) {
                         return rates[a] > rates[b] || (rates[a] == rates[b] && a < b);
                     });
    Vector out = Vector::Zero(n);
    for (Eigen::Index i = 0; i < k; i++) out[order[i]] = rates[order[i]];
    return LayerState(std::move(out));
}

/* EN responses (indexed by EN id, not class). */
inline Vector en_forward(const Vector& mb_rates, const NetworkInstance& inst) {
    if (mb_rates.size() != inst.tpl.n_mb())
        throw std::invalid_argument("en_forward: MB rate vector length != n_mb");
    Vector drive = inst.w_mb_en * mb_rates;
    return sigmoid(drive, inst.tpl.en_sigmoid);
}

struct PresentationResult {
    EnResponseRecord record;
    PresentationSummary summary;
};

/* Present one sample: integrate the AL, average the readout window, cascade
 * through MB and ENs. The EN layer is a deterministic map of the averaged MB
 * activity, so its readout-window mean equals this single evaluation. */
inline PresentationResult present_sample(const Vector& features, const NetworkInstance& inst,
                                         double octopamine, double sparsity, Rng& rng,
                                         int sample_class = -1, Phase phase = Phase::Baseline) {
    const auto traj = al_forward(features, inst, octopamine, rng);
    const auto n_read =
        static_cast<std::size_t>(std::llround(inst.tpl.readout_window / inst.tpl.dt));

    Vector al_mean = Vector::Zero(features.size());
    for (std::size_t k = traj.size() - n_read; k < traj.size(); k++) al_mean += traj[k].rates;
    al_mean /= static_cast<double>(n_read);

    LayerState mb = mb_forward(al_mean, inst, sparsity, octopamine);
    Vector en_by_id = en_forward(mb.rates, inst);

    PresentationResult out;
    out.record.responses.resize(inst.tpl.n_classes);
    for (int j = 0; j < inst.tpl.n_classes; j++)
        out.record.responses[j] = en_by_id[inst.en_for_class(j)];
    out.record.sample_class = sample_class;
    out.record.phase = phase;
    out.summary.al_mean = std::move(al_mean);
    out.summary.mb_rates = std::move(mb.rates);
    return out;
}

}  // namespace mothnet
