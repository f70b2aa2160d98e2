#pragma once
// On-disk formats.
//
//  - NetworkInstance: versioned little-endian binary ("MNETINS1"), bit-exact
//    round trip of all weights and template parameters.
//  - FeatureDataset: columnar text, '#'-prefixed header (format version,
//    manifest, pixel mask), then one sample per row:
//    raw_index <TAB> label <TAB> f0 ... fN ('%.17g', lossless for doubles).
//  - Results: tidy TSV, one row per instance per data point, plus a summary
//    table (mean +/- sample std per point); confusion matrices and
//    timecourses as separate TSV files.

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mothnet/dataset.hpp"
#include "mothnet/experiments.hpp"
#include "mothnet/network.hpp"

namespace mothnet {

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}
inline void put_u64(std::ostream& out, std::uint64_t v) {
    put_u32(out, static_cast<std::uint32_t>(v));
    put_u32(out, static_cast<std::uint32_t>(v >> 32));
}
inline void put_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put_u64(out, bits);
}
inline std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw std::runtime_error("truncated instance file");
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}
inline std::uint64_t get_u64(std::istream& in) {
    std::uint64_t lo = get_u32(in), hi = get_u32(in);
    return lo | (hi << 32);
}
inline double get_f64(std::istream& in) {
    std::uint64_t bits = get_u64(in);
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}
inline void put_matrix(std::ostream& out, const Matrix& m) {
    put_u32(out, static_cast<std::uint32_t>(m.rows()));
    put_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); r++)
        for (Eigen::Index c = 0; c < m.cols(); c++) put_f64(out, m(r, c));
}
inline Matrix get_matrix(std::istream& in) {
    std::uint32_t rows = get_u32(in), cols = get_u32(in);
    Matrix m(rows, cols);
    for (std::uint32_t r = 0; r < rows; r++)
        for (std::uint32_t c = 0; c < cols; c++) m(r, c) = get_f64(in);
    return m;
}

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
inline std::string fmt_short(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace detail

inline constexpr char kInstanceMagic[9] = "MNETINS1";

inline void save_instance(const NetworkInstance& inst, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_instance: cannot open " + path);
    out.write(kInstanceMagic, 8);
    detail::put_u32(out, 1);  // format version

    const NetworkTemplate& t = inst.tpl;
    detail::put_u32(out, static_cast<std::uint32_t>(t.n_features));
    detail::put_u32(out, static_cast<std::uint32_t>(t.mb_ratio));
    detail::put_u32(out, static_cast<std::uint32_t>(t.n_classes));
    detail::put_u32(out, static_cast<std::uint32_t>(t.n_sniffs));
    detail::put_u32(out, t.octopamine_to_mb ? 1 : 0);
    for (double v : {t.al_lateral_inhibition_strength, t.al_mb_connection_prob, t.weight_init_low,
                     t.weight_init_high, t.sparsity_fraction, t.sparsity_fraction_training,
                     t.octopamine_level, t.noise_amplitude_al, t.growth_rate_pre,
                     t.growth_rate_post, t.decay_rate_post, t.weight_max, t.goal, t.tau, t.dt,
                     t.presentation_window, t.readout_window, t.al_sigmoid.max_rate,
                     t.al_sigmoid.slope, t.al_sigmoid.offset, t.mb_sigmoid.max_rate,
                     t.mb_sigmoid.slope, t.mb_sigmoid.offset, t.en_sigmoid.max_rate,
                     t.en_sigmoid.slope, t.en_sigmoid.offset})
        detail::put_f64(out, v);

    detail::put_u64(out, inst.seed);
    detail::put_u32(out, static_cast<std::uint32_t>(inst.en_class_assignment.size()));
    for (int c : inst.en_class_assignment) detail::put_u32(out, static_cast<std::uint32_t>(c));
    detail::put_matrix(out, inst.w_al_mb);
    detail::put_matrix(out, inst.al_mb_mask);
    detail::put_matrix(out, inst.w_mb_en);
    detail::put_matrix(out, inst.al_inhibition);
    if (!out) throw std::runtime_error("save_instance: write failed for " + path);
}

inline NetworkInstance load_instance(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_instance: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (in.gcount() != 8 || std::memcmp(magic, kInstanceMagic, 8) != 0)
        throw std::runtime_error("load_instance: bad magic in " + path);
    if (detail::get_u32(in) != 1) throw std::runtime_error("load_instance: unknown version");

    NetworkInstance inst;
    NetworkTemplate& t = inst.tpl;
    t.n_features = static_cast<int>(detail::get_u32(in));
    t.mb_ratio = static_cast<int>(detail::get_u32(in));
    t.n_classes = static_cast<int>(detail::get_u32(in));
    t.n_sniffs = static_cast<int>(detail::get_u32(in));
    t.octopamine_to_mb = detail::get_u32(in) != 0;
    for (double* v : {&t.al_lateral_inhibition_strength, &t.al_mb_connection_prob,
                      &t.weight_init_low, &t.weight_init_high, &t.sparsity_fraction,
                      &t.sparsity_fraction_training, &t.octopamine_level, &t.noise_amplitude_al,
                      &t.growth_rate_pre, &t.growth_rate_post, &t.decay_rate_post, &t.weight_max,
                      &t.goal, &t.tau, &t.dt, &t.presentation_window, &t.readout_window,
                      &t.al_sigmoid.max_rate, &t.al_sigmoid.slope, &t.al_sigmoid.offset,
                      &t.mb_sigmoid.max_rate, &t.mb_sigmoid.slope, &t.mb_sigmoid.offset,
                      &t.en_sigmoid.max_rate, &t.en_sigmoid.slope, &t.en_sigmoid.offset})
        *v = detail::get_f64(in);

    inst.seed = detail::get_u64(in);
    std::uint32_t n_assign = detail::get_u32(in);
    inst.en_class_assignment.resize(n_assign);
    for (std::uint32_t i = 0; i < n_assign; i++)
        inst.en_class_assignment[i] = static_cast<int>(detail::get_u32(in));
    inst.w_al_mb = detail::get_matrix(in);
    inst.al_mb_mask = detail::get_matrix(in);
    inst.w_mb_en = detail::get_matrix(in);
    inst.al_inhibition = detail::get_matrix(in);
    return inst;
}

/* ------------------------------------------------------------------ */
/* Feature dataset text format                                         */
/* ------------------------------------------------------------------ */

inline void write_feature_dataset(const FeatureDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_feature_dataset: cannot open " + path);
    out << "# mothnet-features v1\n";
    out << "# source: " << to_string(ds.manifest.source) << "\n";
    out << "# scaling_mode: " << to_string(ds.scaling_mode) << "\n";
    out << "# seed: " << ds.manifest.seed << "\n";
    out << "# set_aside_per_class: " << ds.manifest.set_aside_per_class << "\n";
    out << "# grid: " << ds.grid_height << " " << ds.grid_width << "\n";
    out << "# n_features: " << ds.n_features() << "\n";
    out << "# pixel_mask:";
    for (int px : ds.pixel_mask) out << " " << px;
    out << "\n# set_aside_ids:";
    for (int id : ds.manifest.set_aside_ids) out << " " << id;
    out << "\n# columns: raw_index label features...\n";
    for (int r = 0; r < ds.n_samples(); r++) {
        out << ds.raw_indices[r] << "\t" << ds.labels[r];
        for (int c = 0; c < ds.n_features(); c++)
            out << "\t" << detail::fmt_double(ds.features(r, c));
        out << "\n";
    }
    if (!out) throw std::runtime_error("write_feature_dataset: write failed for " + path);
}

inline FeatureDataset read_feature_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_feature_dataset: cannot open " + path);
    FeatureDataset ds;
    int n_features = -1;
    std::string line;
    std::vector<std::vector<double>> rows;

    auto parse_ints = [](std::istringstream& ss) {
        std::vector<int> out;
        int v;
        while (ss >> v) out.push_back(v);
        return out;
    };

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ss(line.substr(1));
            std::string key;
            ss >> key;
            if (key == "source:") {
                std::string v;
                ss >> v;
                ds.manifest.source = v == "omniglot" ? ImageSource::Omniglot : ImageSource::Mnist;
            } else if (key == "scaling_mode:") {
                std::string v;
                ss >> v;
                ds.scaling_mode = v == "by_percentile" ? ScalingMode::ByPercentile : ScalingMode::BySum;
            } else if (key == "seed:") {
                ss >> ds.manifest.seed;
            } else if (key == "set_aside_per_class:") {
                ss >> ds.manifest.set_aside_per_class;
            } else if (key == "grid:") {
                ss >> ds.grid_height >> ds.grid_width;
            } else if (key == "n_features:") {
                ss >> n_features;
            } else if (key == "pixel_mask:") {
                ds.pixel_mask = parse_ints(ss);
            } else if (key == "set_aside_ids:") {
                ds.manifest.set_aside_ids = parse_ints(ss);
            }
            continue;
        }
        std::istringstream ss(line);
        int raw_index, label;
        if (!(ss >> raw_index >> label))
            throw std::runtime_error("read_feature_dataset: bad row in " + path);
        std::vector<double> vals;
        double v;
        while (ss >> v) vals.push_back(v);
        if (n_features >= 0 && static_cast<int>(vals.size()) != n_features)
            throw std::runtime_error("read_feature_dataset: row width mismatch in " + path);
        ds.raw_indices.push_back(raw_index);
        ds.labels.push_back(label);
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw std::runtime_error("read_feature_dataset: no samples in " + path);
    ds.features.resize(rows.size(), rows[0].size());
    for (std::size_t r = 0; r < rows.size(); r++)
        for (std::size_t c = 0; c < rows[r].size(); c++) ds.features(r, c) = rows[r][c];
    return ds;
}

/* ------------------------------------------------------------------ */
/* Results tables                                                      */
/* ------------------------------------------------------------------ */

inline void write_results_table(const ExperimentResult& result, const std::string& path,
                                std::uint64_t master_seed) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_results_table: cannot open " + path);
    out << "# mothnet-results v1\n";
    out << "# master_seed: " << master_seed << "\n";
    out << "axis\tvalue\taxis2\tvalue2\tinstance\tinstance_seed\tbaseline_acc_loglik\t"
           "post_acc_loglik\tbaseline_acc_softmax\tpost_acc_softmax\tlearning_focus\tsnr\tnn_acc\n";
    for (const auto& pt : result.points) {
        for (std::size_t i = 0; i < pt.instances.size(); i++) {
            const auto& r = pt.instances[i];
            out << pt.axis << "\t" << detail::fmt_short(pt.value) << "\t"
                << (pt.axis2.empty() ? "-" : pt.axis2) << "\t" << detail::fmt_short(pt.value2)
                << "\t" << i << "\t" << r.instance_seed << "\t"
                << detail::fmt_short(r.baseline_acc_loglik) << "\t"
                << detail::fmt_short(r.post_acc_loglik) << "\t"
                << detail::fmt_short(r.baseline_acc_softmax) << "\t"
                << detail::fmt_short(r.post_acc_softmax) << "\t"
                << detail::fmt_short(r.learning_focus) << "\t" << detail::fmt_short(r.snr) << "\t"
                << detail::fmt_short(r.nn_acc) << "\n";
        }
    }
    if (!out) throw std::runtime_error("write_results_table: write failed for " + path);
}

inline void write_summary_table(const ExperimentResult& result, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_summary_table: cannot open " + path);
    out << "# mothnet-summary v1 (mean +/- sample std over instances)\n";
    out << "axis\tvalue\taxis2\tvalue2\tn\tbaseline_loglik_mean\tbaseline_loglik_std\t"
           "post_loglik_mean\tpost_loglik_std\tpost_softmax_mean\tpost_softmax_std\t"
           "lf_mean\tlf_std\tsnr_mean\tsnr_std\tnn_mean\tnn_std\n";
    using IR = InstanceResult;
    for (const auto& pt : result.points) {
        out << pt.axis << "\t" << detail::fmt_short(pt.value) << "\t"
            << (pt.axis2.empty() ? "-" : pt.axis2) << "\t" << detail::fmt_short(pt.value2) << "\t"
            << pt.instances.size();
        for (auto field : {&IR::baseline_acc_loglik, &IR::post_acc_loglik, &IR::post_acc_softmax,
                           &IR::learning_focus, &IR::snr, &IR::nn_acc})
            out << "\t" << detail::fmt_short(pt.mean_of(field)) << "\t"
                << detail::fmt_short(pt.std_of(field));
        out << "\n";
    }
}

inline void write_confusion_matrices(const ExperimentResult& result, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_confusion_matrices: cannot open " + path);
    out << "# mothnet-confusion v1; post-training, summed over instances; rows = true class\n";
    for (const auto& pt : result.points) {
        for (const char* kind : {"loglik", "softmax"}) {
            Eigen::MatrixXi sum;
            for (const auto& r : pt.instances) {
                const auto& m =
                    std::string(kind) == "loglik" ? r.confusion_loglik : r.confusion_softmax;
                if (m.size() == 0) continue;
                if (sum.size() == 0)
                    sum = m;
                else
                    sum += m;
            }
            if (sum.size() == 0) continue;
            out << "point\t" << pt.axis << "=" << detail::fmt_short(pt.value);
            if (!pt.axis2.empty()) out << "\t" << pt.axis2 << "=" << detail::fmt_short(pt.value2);
            out << "\tclassifier=" << kind << "\n";
            for (int r = 0; r < sum.rows(); r++) {
                for (int c = 0; c < sum.cols(); c++) out << sum(r, c) << (c + 1 < sum.cols() ? "\t" : "\n");
            }
        }
    }
}

inline void write_timecourses(const std::vector<TimecourseRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_timecourses: cannot open " + path);
    out << "# mothnet-timecourses v1; trained-pass responses normalized by the EN's mean "
           "trained-class response\n";
    out << "en\tphase\tposition\tsample_class\tresponse\n";
    for (const auto& r : rows)
        out << r.en << "\t" << (r.post ? "post" : "pre") << "\t" << r.position << "\t"
            << r.sample_class << "\t" << detail::fmt_short(r.response) << "\n";
}

}  // namespace mothnet
