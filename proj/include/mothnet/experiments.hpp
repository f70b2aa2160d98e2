#pragma once
// Experiment harness: the three-stage protocol (baseline / training /
// validation), the learning-focus and intra-class SNR metrics, parameter
// sweeps with per-point instance populations, the nearest-neighbor
// baseline, and EN timecourse emission.
//
// Reproducibility contract: every number is a pure function of the master
// seed. Child seeds hash (master, axis name, axis value, instance index), so
// adding sweep values never perturbs existing points, and instances within a
// sweep are embarrassingly parallel with a deterministic ordered merge.

#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "mothnet/classifiers.hpp"
#include "mothnet/dataset.hpp"
#include "mothnet/network.hpp"
#include "mothnet/plasticity.hpp"
#include "mothnet/rng.hpp"

namespace mothnet {

enum class ClassifierKind { Softmax, LogLik, Both };

struct ExperimentConfig {
    NetworkTemplate tpl;
    int n_train_per_class = 10;
    int n_instances = 13;
    int n_baseline = 15;
    int n_validation = 15;
    ClassifierKind classifier = ClassifierKind::Both;
    double sigma_floor = kDefaultSigmaFloor;
    bool holdout_stats = false;      // fit stats on a disjoint half instead of the scored set
    bool collect_timecourses = false;
    bool with_nn_baseline = false;   // also score k-NN on each instance's pools
    int knn_k = 0;                   // 0 = auto (1 for N <= 10, else 3)
    std::string sweep_axis;          // empty = single point
    std::vector<double> sweep_values;
    std::string sweep_axis2;         // optional second axis (grid sweeps)
    std::vector<double> sweep_values2;
    std::uint64_t master_seed = 12345;
    int workers = 1;
};

struct TimecourseRow {
    int en = 0;            // class-aligned EN index
    bool post = false;     // false = naive pass, true = trained pass
    int position = 0;      // presentation number within the pass
    int sample_class = 0;
    double response = 0.0; // trained pass is normalized by the EN's mean trained-class response
};

struct InstanceResult {
    std::uint64_t instance_seed = 0;
    std::uint64_t pool_seed = 0;
    double baseline_acc_loglik = std::numeric_limits<double>::quiet_NaN();
    double post_acc_loglik = std::numeric_limits<double>::quiet_NaN();
    double baseline_acc_softmax = std::numeric_limits<double>::quiet_NaN();
    double post_acc_softmax = std::numeric_limits<double>::quiet_NaN();
    double learning_focus = std::numeric_limits<double>::quiet_NaN();
    double snr = std::numeric_limits<double>::quiet_NaN();
    double nn_acc = std::numeric_limits<double>::quiet_NaN();
    Eigen::MatrixXi confusion_loglik;   // post-training; rows true class, cols predicted
    Eigen::MatrixXi confusion_softmax;
    std::vector<TimecourseRow> timecourses;
};

struct PointResult {
    std::string axis = "none";
    double value = 0.0;
    std::string axis2;
    double value2 = 0.0;
    std::vector<InstanceResult> instances;

    double mean_of(double InstanceResult::* field) const {
        double s = 0.0;
        for (const auto& r : instances) s += r.*field;
        return s / static_cast<double>(instances.size());
    }
    double std_of(double InstanceResult::* field) const {
        if (instances.size() < 2) return 0.0;
        double m = mean_of(field), s = 0.0;
        for (const auto& r : instances) s += (r.*field - m) * (r.*field - m);
        return std::sqrt(s / static_cast<double>(instances.size() - 1));
    }
};

struct ExperimentResult {
    std::vector<PointResult> points;
};

/* ------------------------------------------------------------------ */
/* Metrics                                                             */
/* ------------------------------------------------------------------ */

/* Per trained class j, the mean standardized separation between the
 * trained-class response and each control class i:
 *   (1/(C-1)) * sum_{i != j} (mu_jj - mu_ji) / (0.5 * (sigma_jj + sigma_ji))
 * with mu/sigma indexed (EN, class) and ENs class-aligned. */
inline std::vector<double> per_class_learning_focus(const ResponseStats& stats) {
    if (stats.n_en() != stats.n_classes())
        throw std::invalid_argument("learning_focus: stats must be square (one EN per class)");
    const int n = stats.n_classes();
    std::vector<double> lf(n, 0.0);
    for (int j = 0; j < n; j++) {
        double acc = 0.0;
        for (int i = 0; i < n; i++) {
            if (i == j) continue;
            acc += (stats.mu(j, j) - stats.mu(j, i)) / (0.5 * (stats.sigma(j, j) + stats.sigma(j, i)));
        }
        lf[j] = acc / static_cast<double>(n - 1);
    }
    return lf;
}

/* Grand mean of the per-class learning focus. */
inline double compute_learning_focus(const ResponseStats& stats) {
    auto lf = per_class_learning_focus(stats);
    double s = 0.0;
    for (double v : lf) s += v;
    return s / static_cast<double>(lf.size());
}

/* Mean intra-class signal-to-noise ratio: mu/sigma per (EN, class) cell of
 * the fitted response stats, averaged over all cells. */
inline double compute_snr(const std::vector<EnResponseRecord>& records,
                          double sigma_floor = kDefaultSigmaFloor) {
    ResponseStats stats = fit_stats(records, sigma_floor);
    double s = 0.0;
    for (int i = 0; i < stats.n_en(); i++)
        for (int j = 0; j < stats.n_classes(); j++) s += stats.mu(i, j) / stats.sigma(i, j);
    return s / static_cast<double>(stats.n_en() * stats.n_classes());
}

/* ------------------------------------------------------------------ */
/* Nearest-neighbor baseline                                           */
/* ------------------------------------------------------------------ */

/* k-NN with features z-scaled by training-pool statistics and Euclidean
 * distance. Neighbors sort by (distance, row index); vote ties break to the
 * lowest class index. k = 0 selects 1 for <= 10 training samples per class
 * and 3 otherwise. Zero-variance features are constant in the training pool
 * and drop out of the distance. */
inline double nearest_neighbor_baseline(const FeatureDataset& ds,
                                        const std::vector<int>& train_rows,
                                        const std::vector<int>& test_rows, int k = 0) {
    if (train_rows.empty() || test_rows.empty())
        throw std::invalid_argument("nearest_neighbor_baseline: empty pool");
    const int n_classes = ds.n_classes();
    std::vector<int> per_class(n_classes, 0);
    for (int r : train_rows) per_class[ds.labels[r]]++;
    for (int c = 0; c < n_classes; c++)
        if (per_class[c] == 0)
            throw std::invalid_argument("nearest_neighbor_baseline: class " + std::to_string(c) +
                                        " missing from training pool");
    if (k == 0) {
        int n_per = static_cast<int>(train_rows.size()) / n_classes;
        k = n_per <= 10 ? 1 : 3;
    }
    k = std::min<int>(k, static_cast<int>(train_rows.size()));

    const int n_f = ds.n_features();
    Vector mean = Vector::Zero(n_f), scale = Vector::Zero(n_f);
    for (int r : train_rows) mean += ds.features.row(r).transpose();
    mean /= static_cast<double>(train_rows.size());
    if (train_rows.size() > 1) {
        for (int r : train_rows) {
            Vector d = ds.features.row(r).transpose() - mean;
            scale += d.cwiseProduct(d);
        }
        scale /= static_cast<double>(train_rows.size() - 1);
        scale = scale.cwiseSqrt();
    }
    for (int f = 0; f < n_f; f++) scale[f] = scale[f] > 0.0 ? 1.0 / scale[f] : 0.0;

    Matrix ztrain(train_rows.size(), n_f);
    for (std::size_t i = 0; i < train_rows.size(); i++)
        ztrain.row(i) =
            ((ds.features.row(train_rows[i]).transpose() - mean).cwiseProduct(scale)).transpose();

    int correct = 0;
    std::vector<std::pair<double, int>> dist(train_rows.size());
    for (int tr : test_rows) {
        Vector z = (ds.features.row(tr).transpose() - mean).cwiseProduct(scale);
        for (std::size_t i = 0; i < train_rows.size(); i++) {
            dist[i] = {(ztrain.row(i).transpose() - z).squaredNorm(), static_cast<int>(i)};
        }
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
        std::vector<int> votes(n_classes, 0);
        for (int i = 0; i < k; i++) votes[ds.labels[train_rows[dist[i].second]]]++;
        int best = 0;
        for (int c = 1; c < n_classes; c++)
            if (votes[c] > votes[best]) best = c;
        if (best == ds.labels[tr]) correct++;
    }
    return static_cast<double>(correct) / static_cast<double>(test_rows.size());
}

/* ------------------------------------------------------------------ */
/* Three-stage protocol                                                */
/* ------------------------------------------------------------------ */

namespace detail {

struct ScoredPhase {
    ResponseStats stats;
    double acc_loglik = std::numeric_limits<double>::quiet_NaN();
    double acc_softmax = std::numeric_limits<double>::quiet_NaN();
    Eigen::MatrixXi confusion_loglik;
    Eigen::MatrixXi confusion_softmax;
};

/* Fit stats and score one phase's records. By default the scored set is the
 * reference set itself; in holdout mode each class's records split into a
 * fit half (first ceil(n/2) in presentation order) and a scored half. */
inline ScoredPhase score_phase(const std::vector<EnResponseRecord>& records, bool holdout,
                               double sigma_floor) {
    ScoredPhase out;
    std::vector<EnResponseRecord> fit_set, score_set;
    if (!holdout) {
        fit_set = records;
        score_set = records;
    } else {
        int n_classes = 0;
        for (const auto& r : records) n_classes = std::max(n_classes, r.sample_class + 1);
        std::vector<int> seen(n_classes, 0), total(n_classes, 0);
        for (const auto& r : records) total[r.sample_class]++;
        for (const auto& r : records) {
            int half = (total[r.sample_class] + 1) / 2;
            (seen[r.sample_class]++ < half ? fit_set : score_set).push_back(r);
        }
    }
    out.stats = fit_stats(fit_set, sigma_floor);
    const int n_classes = out.stats.n_classes();
    out.confusion_loglik = Eigen::MatrixXi::Zero(n_classes, n_classes);
    out.confusion_softmax = Eigen::MatrixXi::Zero(n_classes, n_classes);
    int ok_ll = 0, ok_sm = 0;
    for (const auto& r : score_set) {
        int p_ll = loglik_predict(r.responses, out.stats).label;
        int p_sm = softmax_predict(r.responses).label;
        out.confusion_loglik(r.sample_class, p_ll)++;
        out.confusion_softmax(r.sample_class, p_sm)++;
        ok_ll += p_ll == r.sample_class;
        ok_sm += p_sm == r.sample_class;
    }
    out.acc_loglik = static_cast<double>(ok_ll) / static_cast<double>(score_set.size());
    out.acc_softmax = static_cast<double>(ok_sm) / static_cast<double>(score_set.size());
    return out;
}

inline void trace_pass(const NetworkInstance& inst, const FeatureDataset& ds,
                       const std::vector<int>& rows, bool post, Rng& rng,
                       std::vector<TimecourseRow>& out) {
    const int n_classes = inst.tpl.n_classes;
    Matrix resp(n_classes, rows.size());
    std::vector<int> cls(rows.size());
    for (std::size_t p = 0; p < rows.size(); p++) {
        auto pres = present_sample(ds.features.row(rows[p]).transpose(), inst, 0.0,
                                   inst.tpl.sparsity_fraction, rng, ds.labels[rows[p]],
                                   Phase::Validation);
        resp.col(p) = pres.record.responses;
        cls[p] = ds.labels[rows[p]];
    }
    for (int e = 0; e < n_classes; e++) {
        double norm = 1.0;
        if (post) {
            double s = 0.0;
            int n = 0;
            for (std::size_t p = 0; p < rows.size(); p++)
                if (cls[p] == e) {
                    s += resp(e, p);
                    n++;
                }
            if (n > 0 && s > 0.0) norm = s / static_cast<double>(n);
        }
        for (std::size_t p = 0; p < rows.size(); p++)
            out.push_back({e, post, static_cast<int>(p), cls[p], resp(e, p) / norm});
    }
}

}  // namespace detail

/* Run the three-stage protocol on one (naive) instance:
 *   1. baseline: present the baseline pool without octopamine, fit naive
 *      stats, score naive accuracy;
 *   2. training: each training sample, in pool order, presented n_sniffs
 *      times with octopamine on and one plasticity update per presentation
 *      (only the trained class's MB->EN row changes post-MB);
 *   3. validation: present the validation pool without octopamine, fit
 *      post-training stats, score accuracy, learning focus, and SNR.
 * Each phase owns an independent derived stream, so enabling the optional
 * timecourse passes never changes accuracy numbers. */
inline InstanceResult run_stage_protocol(NetworkInstance& inst, const FeatureDataset& ds,
                                         const ExperimentPools& pools,
                                         const ExperimentConfig& cfg) {
    InstanceResult res;
    res.instance_seed = inst.seed;

    Rng r_base(derive_seed(inst.seed, "phase_baseline"));
    Rng r_train(derive_seed(inst.seed, "phase_training"));
    Rng r_valid(derive_seed(inst.seed, "phase_validation"));

    std::vector<EnResponseRecord> baseline_records;
    baseline_records.reserve(pools.baseline.size());
    for (int row : pools.baseline)
        baseline_records.push_back(present_sample(ds.features.row(row).transpose(), inst, 0.0,
                                                  inst.tpl.sparsity_fraction, r_base,
                                                  ds.labels[row], Phase::Baseline)
                                       .record);
    auto base = detail::score_phase(baseline_records, cfg.holdout_stats, cfg.sigma_floor);
    res.baseline_acc_loglik = base.acc_loglik;
    res.baseline_acc_softmax = base.acc_softmax;

    if (cfg.collect_timecourses) {
        Rng r_trace(derive_seed(inst.seed, "trace_pre"));
        detail::trace_pass(inst, ds, pools.validation, false, r_trace, res.timecourses);
    }

    const PlasticityParams params = PlasticityParams::from_template(inst.tpl);
    for (int row : pools.training) {
        for (int s = 0; s < inst.tpl.n_sniffs; s++) {
            auto pres = present_sample(ds.features.row(row).transpose(), inst,
                                       inst.tpl.octopamine_level,
                                       inst.tpl.sparsity_fraction_training, r_train,
                                       ds.labels[row], Phase::Training);
            train_on_presentation(inst, pres.summary, pres.record, ds.labels[row], params);
        }
    }

    std::vector<EnResponseRecord> validation_records;
    validation_records.reserve(pools.validation.size());
    for (int row : pools.validation)
        validation_records.push_back(present_sample(ds.features.row(row).transpose(), inst, 0.0,
                                                    inst.tpl.sparsity_fraction, r_valid,
                                                    ds.labels[row], Phase::Validation)
                                         .record);
    auto post = detail::score_phase(validation_records, cfg.holdout_stats, cfg.sigma_floor);
    res.post_acc_loglik = post.acc_loglik;
    res.post_acc_softmax = post.acc_softmax;
    res.confusion_loglik = post.confusion_loglik;
    res.confusion_softmax = post.confusion_softmax;
    res.learning_focus = compute_learning_focus(post.stats);
    res.snr = compute_snr(validation_records, cfg.sigma_floor);

    if (cfg.collect_timecourses) {
        Rng r_trace(derive_seed(inst.seed, "trace_post"));
        detail::trace_pass(inst, ds, pools.validation, true, r_trace, res.timecourses);
    }
    return res;
}

/* Pre/post EN response traces over the validation pool (class-major order),
 * produced by running the full protocol with trace collection on. The
 * instance comes out trained. */
inline std::vector<TimecourseRow> emit_timecourses(NetworkInstance& inst, const FeatureDataset& ds,
                                                   const ExperimentPools& pools,
                                                   ExperimentConfig cfg) {
    cfg.collect_timecourses = true;
    return run_stage_protocol(inst, ds, pools, cfg).timecourses;
}

/* ------------------------------------------------------------------ */
/* Sweeps                                                              */
/* ------------------------------------------------------------------ */

/* Apply one sweep value. "sparsity" sets training and non-training sparsity
 * together; "n_train_per_class" adjusts the protocol, everything else is a
 * numeric template field. */
inline void apply_sweep_value(ExperimentConfig& cfg, const std::string& axis, double value) {
    auto as_int = [&](const char* what) {
        if (value != std::floor(value))
            throw std::invalid_argument(std::string("sweep value for ") + what +
                                        " must be an integer");
        return static_cast<int>(value);
    };
    if (axis == "n_train_per_class") {
        cfg.n_train_per_class = as_int("n_train_per_class");
    } else if (axis == "n_sniffs") {
        cfg.tpl.n_sniffs = as_int("n_sniffs");
    } else if (axis == "mb_ratio") {
        cfg.tpl.mb_ratio = as_int("mb_ratio");
    } else if (axis == "sparsity") {
        cfg.tpl.sparsity_fraction = value;
        cfg.tpl.sparsity_fraction_training = value;
    } else if (axis == "sparsity_fraction") {
        cfg.tpl.sparsity_fraction = value;
    } else if (axis == "sparsity_fraction_training") {
        cfg.tpl.sparsity_fraction_training = value;
    } else if (axis == "noise_amplitude_al") {
        cfg.tpl.noise_amplitude_al = value;
    } else if (axis == "octopamine_level") {
        cfg.tpl.octopamine_level = value;
    } else if (axis == "goal") {
        cfg.tpl.goal = value;
    } else if (axis == "growth_rate_post") {
        cfg.tpl.growth_rate_post = value;
    } else if (axis == "decay_rate_post") {
        cfg.tpl.decay_rate_post = value;
    } else if (axis == "growth_rate_pre") {
        cfg.tpl.growth_rate_pre = value;
    } else if (axis == "al_lateral_inhibition_strength") {
        cfg.tpl.al_lateral_inhibition_strength = value;
    } else if (axis == "al_mb_connection_prob") {
        cfg.tpl.al_mb_connection_prob = value;
    } else {
        throw std::invalid_argument("unknown sweep axis: " + axis);
    }
}

/* Run a (possibly gridded) sweep. One fresh instance population per point;
 * child seeds hash the axis names and values, never list positions. Tasks
 * run on cfg.workers threads and land in preassigned slots, so the merged
 * result is independent of scheduling. */
inline ExperimentResult run_sweep(const FeatureDataset& ds, const ExperimentConfig& cfg) {
    std::vector<std::pair<double, double>> grid;
    const bool has1 = !cfg.sweep_axis.empty();
    const bool has2 = !cfg.sweep_axis2.empty();
    if (has2 && !has1) throw std::invalid_argument("run_sweep: sweep_axis2 without sweep_axis");
    if (has1 && cfg.sweep_values.empty())
        throw std::invalid_argument("run_sweep: sweep_axis without values");
    if (has2 && cfg.sweep_values2.empty())
        throw std::invalid_argument("run_sweep: sweep_axis2 without values");

    for (double v1 : has1 ? cfg.sweep_values : std::vector<double>{0.0})
        for (double v2 : has2 ? cfg.sweep_values2 : std::vector<double>{0.0}) grid.push_back({v1, v2});

    ExperimentResult result;
    result.points.resize(grid.size());
    for (std::size_t p = 0; p < grid.size(); p++) {
        result.points[p].axis = has1 ? cfg.sweep_axis : "none";
        result.points[p].value = grid[p].first;
        result.points[p].axis2 = cfg.sweep_axis2;
        result.points[p].value2 = grid[p].second;
        result.points[p].instances.resize(cfg.n_instances);
    }

    struct Task {
        std::size_t point;
        int instance;
    };
    std::vector<Task> tasks;
    for (std::size_t p = 0; p < grid.size(); p++)
        for (int i = 0; i < cfg.n_instances; i++) tasks.push_back({p, i});

    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;

    auto worker = [&]() {
        for (;;) {
            std::size_t t = next.fetch_add(1);
            if (t >= tasks.size()) return;
            {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (first_error) return;
            }
            try {
                const Task task = tasks[t];
                ExperimentConfig pt = cfg;
                if (has1) apply_sweep_value(pt, cfg.sweep_axis, grid[task.point].first);
                if (has2) apply_sweep_value(pt, cfg.sweep_axis2, grid[task.point].second);

                const std::uint64_t inst_seed =
                    derive_seed(cfg.master_seed, "instance", pt.sweep_axis, grid[task.point].first,
                                pt.sweep_axis2, grid[task.point].second, task.instance);
                const std::uint64_t pool_seed =
                    derive_seed(cfg.master_seed, "pools", pt.sweep_axis, grid[task.point].first,
                                pt.sweep_axis2, grid[task.point].second, task.instance);

                auto pools = draw_experiment_pools(ds, pt.n_train_per_class, pt.n_baseline,
                                                   pt.n_validation, pool_seed);
                NetworkInstance inst = generate_instance(pt.tpl, inst_seed);
                InstanceResult r = run_stage_protocol(inst, ds, pools, pt);
                r.pool_seed = pool_seed;
                if (pt.with_nn_baseline)
                    r.nn_acc = nearest_neighbor_baseline(ds, pools.training, pools.validation,
                                                         pt.knn_k);
                result.points[task.point].instances[task.instance] = std::move(r);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    const int n_workers = std::max(1, cfg.workers);
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(n_workers);
        for (int w = 0; w < n_workers; w++) threads.emplace_back(worker);
        for (auto& th : threads) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);
    return result;
}

}  // namespace mothnet
