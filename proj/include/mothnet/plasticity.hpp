#pragma once
// Octopamine-gated Hebbian plasticity, applied once per training
// presentation using readout-window mean rates.
//
// Growth is the local product rule delta_w = gamma * f_pre * f_post; weights
// whose endpoints were inactive decay proportionally, delta_w = -delta * w.
// The only stabilization is the pair of rails [0, weight_max]. Updates are
// purely local: each weight sees only its two endpoint activities and its
// own value.

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "mothnet/network.hpp"

namespace mothnet {

struct PlasticityParams {
    double gamma_pre = 0.0;   // growth rate, AL->MB, per exposure
    double gamma_post = 0.0;  // growth rate, MB->EN, per exposure
    double delta_post = 0.0;  // decay rate, MB->EN, per exposure
    double weight_max = 1.0;
    double activity_threshold = 0.0;  // at or below counts as silent; k-WTA emits exact zeros

    void validate() const {
        if (!(gamma_pre >= 0.0) || !std::isfinite(gamma_pre))
            throw std::invalid_argument("PlasticityParams: gamma_pre must be finite and >= 0");
        if (!(gamma_post >= 0.0) || !std::isfinite(gamma_post))
            throw std::invalid_argument("PlasticityParams: gamma_post must be finite and >= 0");
        if (!(delta_post >= 0.0 && delta_post < 1.0))
            throw std::invalid_argument("PlasticityParams: delta_post must be in [0, 1)");
        if (!(weight_max > 0.0))
            throw std::invalid_argument("PlasticityParams: weight_max must be > 0");
        if (!(activity_threshold >= 0.0))
            throw std::invalid_argument("PlasticityParams: activity_threshold must be >= 0");
    }

    /* Goal-scaled rates from a template. */
    static PlasticityParams from_template(const NetworkTemplate& tpl) {
        PlasticityParams p;
        p.gamma_pre = tpl.effective_growth_pre();
        p.gamma_post = tpl.effective_growth_post();
        p.delta_post = tpl.effective_decay_post();
        p.weight_max = tpl.weight_max;
        return p;
    }
};

/* Hebbian growth increment; an AND gate in the endpoint rates. */
inline double hebbian_growth(double f_pre, double f_post, double gamma) {
    return gamma * f_pre * f_post;
}

/* Proportional decay of an inactive connection: -delta * w when either
 * endpoint is at or below the silence threshold, else 0. */
inline double inactive_decay(double w, double f_pre, double f_post, double delta,
                             double threshold) {
    return (f_pre <= threshold || f_post <= threshold) ? -delta * w : 0.0;
}

/* Clamp an updated weight to [0, weight_max]. */
inline double apply_rails(double w, double delta_w, double weight_max) {
    double next = w + delta_w;
    if (next < 0.0) return 0.0;
    if (next > weight_max) return weight_max;
    return next;
}

/* Apply one presentation's updates to an instance. Presentations feeding
 * this must have run with octopamine on; plasticity never fires outside
 * training.
 *
 *  - every entry on the fixed AL->MB pattern grows at gamma_pre;
 *  - only the MB->EN row of the EN assigned to target_class changes:
 *    growth where the MB neuron was active, proportional decay where it was
 *    silent;
 *  - rails apply everywhere; the AL->MB sparsity pattern is untouched.
 */
inline void train_on_presentation(NetworkInstance& inst, const PresentationSummary& summary,
                                  const EnResponseRecord& record, int target_class,
                                  const PlasticityParams& params) {
    params.validate();
    if (target_class < 0 || target_class >= inst.tpl.n_classes)
        throw std::invalid_argument("train_on_presentation: unknown target class " +
                                    std::to_string(target_class));
    if (summary.al_mean.size() != inst.tpl.n_features ||
        summary.mb_rates.size() != inst.tpl.n_mb())
        throw std::invalid_argument("train_on_presentation: summary dimensions mismatch");

    const int n_mb = inst.tpl.n_mb();
    const int n_f = inst.tpl.n_features;

    if (params.gamma_pre > 0.0) {
        for (int i = 0; i < n_mb; i++) {
            const double f_mb = summary.mb_rates[i];
            if (f_mb == 0.0) continue;  // growth is zero regardless of the mask
            for (int j = 0; j < n_f; j++) {
                if (inst.al_mb_mask(i, j) == 0.0) continue;
                double dw = hebbian_growth(summary.al_mean[j], f_mb, params.gamma_pre);
                inst.w_al_mb(i, j) = apply_rails(inst.w_al_mb(i, j), dw, params.weight_max);
            }
        }
    }

    const int row = inst.en_for_class(target_class);
    const double f_en = record.responses[target_class];
    for (int m = 0; m < n_mb; m++) {
        const double f_mb = summary.mb_rates[m];
        const double w = inst.w_mb_en(row, m);
        double dw;
        if (f_mb > params.activity_threshold && f_en > params.activity_threshold)
            dw = hebbian_growth(f_mb, f_en, params.gamma_post);
        else
            dw = inactive_decay(w, f_mb, f_en, params.delta_post, params.activity_threshold);
        inst.w_mb_en(row, m) = apply_rails(w, dw, params.weight_max);
    }
}

}  // namespace mothnet
