#pragma once
// Classifiers over EN responses: the softmax rule and the summed
// log-likelihood rule with per-(EN, class) response statistics.
//
// Both predictors are pure functions. Response vectors are class-aligned
// (responses[j] = readout of the EN assigned to class j), so predicted
// labels are vector indices.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mothnet/network.hpp"

namespace mothnet {

inline constexpr double kDefaultSigmaFloor = 1e-4;

/* Per-(EN, class) response statistics fitted on a reference set.
 * mu(i, j) / sigma(i, j) are EN i's sample mean / std over class-j records;
 * sigma is floored so degenerate (zero-variance) cells stay usable. */
struct ResponseStats {
    Matrix mu;     // n_en x n_classes
    Matrix sigma;  // n_en x n_classes, entries >= sigma_floor
    std::vector<int> reference_set_size;  // records per class
    double sigma_floor = kDefaultSigmaFloor;

    int n_en() const { return static_cast<int>(mu.rows()); }
    int n_classes() const { return static_cast<int>(mu.cols()); }
};

/* Fit mu/sigma (sample std, n-1 denominator) from records. Every class in
 * 0..max_label must contribute at least two records. */
inline ResponseStats fit_stats(const std::vector<EnResponseRecord>& records,
                               double sigma_floor = kDefaultSigmaFloor) {
    if (records.empty()) throw std::invalid_argument("fit_stats: no records");
    if (!(sigma_floor > 0.0)) throw std::invalid_argument("fit_stats: sigma_floor must be > 0");

    const int n_en = static_cast<int>(records.front().responses.size());
    int n_classes = 0;
    for (const auto& r : records) {
        if (r.responses.size() != n_en)
            throw std::invalid_argument("fit_stats: inconsistent response lengths");
        if (r.sample_class < 0) throw std::invalid_argument("fit_stats: record without class label");
        n_classes = std::max(n_classes, r.sample_class + 1);
    }

    ResponseStats stats;
    stats.sigma_floor = sigma_floor;
    stats.mu = Matrix::Zero(n_en, n_classes);
    stats.sigma = Matrix::Zero(n_en, n_classes);
    stats.reference_set_size.assign(n_classes, 0);

    for (const auto& r : records) {
        stats.reference_set_size[r.sample_class]++;
        stats.mu.col(r.sample_class) += r.responses;
    }
    for (int j = 0; j < n_classes; j++) {
        if (stats.reference_set_size[j] < 2)
            throw std::invalid_argument("fit_stats: class " + std::to_string(j) +
                                        " has fewer than 2 records");
        stats.mu.col(j) /= static_cast<double>(stats.reference_set_size[j]);
    }
    for (const auto& r : records) {
        Vector d = r.responses - stats.mu.col(r.sample_class);
        stats.sigma.col(r.sample_class) += d.cwiseProduct(d);
    }
    for (int j = 0; j < n_classes; j++) {
        stats.sigma.col(j) /= static_cast<double>(stats.reference_set_size[j] - 1);
        stats.sigma.col(j) = stats.sigma.col(j).cwiseSqrt().cwiseMax(sigma_floor);
    }
    return stats;
}

struct Prediction {
    int label = 0;
    Vector scores;  // probabilities for softmax, summed 4th-power scores for loglik
};

/* Softmax over responses; prediction is the argmax (equivalently the
 * strongest EN). Ties break to the lowest class index. Exponentials are
 * shifted by the max response for numerical stability. */
inline Prediction softmax_predict(const Vector& responses) {
    if (responses.size() == 0) throw std::invalid_argument("softmax_predict: empty responses");
    if (!responses.allFinite())
        throw std::invalid_argument("softmax_predict: non-finite response");

    Prediction pred;
    const double m = responses.maxCoeff();
    pred.scores = (responses.array() - m).exp();
    pred.scores /= pred.scores.sum();
    pred.label = 0;
    for (Eigen::Index j = 1; j < responses.size(); j++)
        if (responses[j] > responses[pred.label]) pred.label = static_cast<int>(j);
    return pred;
}

/* Summed log-likelihood score: score_j = sum_i ((E_i - mu_ij)/sigma_ij)^4,
 * predicted class is the argmin. The 4th power sharpens the usual squared
 * Mahalanobis distance against outliers. Ties break to the lowest index. */
inline Prediction loglik_predict(const Vector& responses, const ResponseStats& stats) {
    if (responses.size() != stats.n_en())
        throw std::invalid_argument("loglik_predict: response length != fitted EN count");
    if (!responses.allFinite())
        throw std::invalid_argument("loglik_predict: non-finite response");

    Prediction pred;
    pred.scores.resize(stats.n_classes());
    for (int j = 0; j < stats.n_classes(); j++) {
        double s = 0.0;
        for (int i = 0; i < stats.n_en(); i++) {
            double z = (responses[i] - stats.mu(i, j)) / stats.sigma(i, j);
            double z2 = z * z;
            s += z2 * z2;
        }
        pred.scores[j] = s;
    }
    pred.label = 0;
    for (int j = 1; j < stats.n_classes(); j++)
        if (pred.scores[j] < pred.scores[pred.label]) pred.label = j;
    return pred;
}

}  // namespace mothnet
