#pragma once
// Layered run configuration.
//
// Format: one `key = value` per line, '#' comments, blank lines ignored.
// Values layer in fixed precedence: built-in defaults (the data directory
// default honors MOTHNET_DATA_DIR), then the config file, then repeated
// --set key=value overrides, then dedicated CLI flags. Unknown keys and
// malformed values fail fast naming the offending key; domain violations
// surface from validate() with the field name. Every run writes its fully
// resolved configuration next to its outputs.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mothnet/experiments.hpp"
#include "mothnet/network.hpp"

namespace mothnet {

struct RunConfig {
    /* Paths. Empty mnist paths resolve against data_dir/mnist/. */
    std::string data_dir = "data";
    std::string mnist_images;
    std::string mnist_labels;
    std::string omniglot_dir;
    std::string features_path;  // explicit feature cache; empty = content-hash cache
    std::string out_dir = "out";
    std::string instance_path;  // save (train) / load (evaluate, timecourse)

    std::string dataset = "mnist";     // mnist | omniglot
    std::string scaling = "by_sum";    // by_sum | by_percentile
    std::string classifier = "both";   // softmax | loglik | both

    std::uint64_t master_seed = 12345;
    int workers = 1;
    int n_train_per_class = 10;
    int n_instances = 13;
    int n_baseline = 15;
    int n_validation = 15;
    int set_aside_per_class = kDefaultSetAsidePerClass;
    double sigma_floor = kDefaultSigmaFloor;
    bool holdout_stats = false;
    bool with_nn_baseline = false;
    int knn_k = 0;  // 0 = auto

    std::string sweep_axis;
    std::vector<double> sweep_values;
    std::string sweep_axis2;
    std::vector<double> sweep_values2;

    NetworkTemplate tpl;

    std::string resolved_mnist_images() const {
        return mnist_images.empty() ? data_dir + "/mnist/mnist-images-idx3-ubyte" : mnist_images;
    }
    std::string resolved_mnist_labels() const {
        return mnist_labels.empty() ? data_dir + "/mnist/mnist-labels-idx1-ubyte" : mnist_labels;
    }

    ScalingMode scaling_mode() const {
        if (scaling == "by_sum") return ScalingMode::BySum;
        if (scaling == "by_percentile") return ScalingMode::ByPercentile;
        throw std::invalid_argument("scaling: must be by_sum or by_percentile");
    }

    ClassifierKind classifier_kind() const {
        if (classifier == "softmax") return ClassifierKind::Softmax;
        if (classifier == "loglik") return ClassifierKind::LogLik;
        if (classifier == "both") return ClassifierKind::Both;
        throw std::invalid_argument("classifier: must be softmax, loglik, or both");
    }

    ExperimentConfig experiment() const {
        ExperimentConfig e;
        e.tpl = tpl;
        e.n_train_per_class = n_train_per_class;
        e.n_instances = n_instances;
        e.n_baseline = n_baseline;
        e.n_validation = n_validation;
        e.classifier = classifier_kind();
        e.sigma_floor = sigma_floor;
        e.holdout_stats = holdout_stats;
        e.with_nn_baseline = with_nn_baseline;
        e.knn_k = knn_k;
        e.sweep_axis = sweep_axis;
        e.sweep_values = sweep_values;
        e.sweep_axis2 = sweep_axis2;
        e.sweep_values2 = sweep_values2;
        e.master_seed = master_seed;
        e.workers = workers;
        return e;
    }

    void validate() const {
        tpl.validate();
        if (dataset != "mnist" && dataset != "omniglot")
            throw std::invalid_argument("dataset: must be mnist or omniglot");
        scaling_mode();
        classifier_kind();
        if (n_instances < 1) throw std::invalid_argument("n_instances: must be >= 1");
        if (n_train_per_class < 0) throw std::invalid_argument("n_train_per_class: must be >= 0");
        if (n_baseline < 2) throw std::invalid_argument("n_baseline: must be >= 2");
        if (n_validation < 2) throw std::invalid_argument("n_validation: must be >= 2");
        if (workers < 1) throw std::invalid_argument("workers: must be >= 1");
        if (set_aside_per_class < 1) throw std::invalid_argument("set_aside_per_class: must be >= 1");
        if (!(sigma_floor > 0)) throw std::invalid_argument("sigma_floor: must be > 0");
        if (knn_k < 0) throw std::invalid_argument("knn_k: must be >= 0");
        if (sweep_axis.empty() != sweep_values.empty())
            throw std::invalid_argument("sweep_axis: axis and sweep_values must be set together");
        if (!sweep_axis2.empty() && sweep_axis.empty())
            throw std::invalid_argument("sweep_axis2: requires sweep_axis");
        if (sweep_axis2.empty() != sweep_values2.empty())
            throw std::invalid_argument("sweep_axis2: axis and sweep_values2 must be set together");
    }
};

namespace detail {

struct ConfigKey {
    std::string name;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

inline long long parse_ll(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    long long out;
    try {
        out = std::stoll(v, &pos);
    } catch (...) {
        throw std::invalid_argument(key + ": expected an integer, got '" + v + "'");
    }
    if (pos != v.size()) throw std::invalid_argument(key + ": expected an integer, got '" + v + "'");
    return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    double out;
    try {
        out = std::stod(v, &pos);
    } catch (...) {
        throw std::invalid_argument(key + ": expected a number, got '" + v + "'");
    }
    if (pos != v.size()) throw std::invalid_argument(key + ": expected a number, got '" + v + "'");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument(key + ": expected true/false, got '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::string item;
    std::istringstream ss(v);
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(parse_double(key, item));
    }
    return out;
}

inline std::string fmt_list(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); i++) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.9g", v[i]);
        out += (i ? "," : "") + std::string(buf);
    }
    return out;
}

inline std::string fmt_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

inline const std::vector<ConfigKey>& config_keys() {
    auto str = [](std::string RunConfig::* f, const char* name) {
        return ConfigKey{name, [f](RunConfig& c, const std::string& v) { c.*f = v; },
                         [f](const RunConfig& c) { return c.*f; }};
    };
    auto num_i = [](int RunConfig::* f, const char* name) {
        return ConfigKey{name,
                         [f, name](RunConfig& c, const std::string& v) {
                             c.*f = static_cast<int>(parse_ll(name, v));
                         },
                         [f](const RunConfig& c) { return std::to_string(c.*f); }};
    };
    auto num_d = [](double RunConfig::* f, const char* name) {
        return ConfigKey{name,
                         [f, name](RunConfig& c, const std::string& v) { c.*f = parse_double(name, v); },
                         [f](const RunConfig& c) { return fmt_num(c.*f); }};
    };
    auto flag = [](bool RunConfig::* f, const char* name) {
        return ConfigKey{name,
                         [f, name](RunConfig& c, const std::string& v) { c.*f = parse_bool(name, v); },
                         [f](const RunConfig& c) { return c.*f ? "true" : "false"; }};
    };
    auto tpl_i = [](int NetworkTemplate::* f, const char* name) {
        return ConfigKey{name,
                         [f, name](RunConfig& c, const std::string& v) {
                             c.tpl.*f = static_cast<int>(parse_ll(name, v));
                         },
                         [f](const RunConfig& c) { return std::to_string(c.tpl.*f); }};
    };
    auto tpl_d = [](double NetworkTemplate::* f, const char* name) {
        return ConfigKey{name,
                         [f, name](RunConfig& c, const std::string& v) {
                             c.tpl.*f = parse_double(name, v);
                         },
                         [f](const RunConfig& c) { return fmt_num(c.tpl.*f); }};
    };
    auto sig_d = [](SigmoidParams NetworkTemplate::* s, double SigmoidParams::* f,
                    const char* name) {
        return ConfigKey{name,
                         [s, f, name](RunConfig& c, const std::string& v) {
                             c.tpl.*s.*f = parse_double(name, v);
                         },
                         [s, f](const RunConfig& c) { return fmt_num(c.tpl.*s.*f); }};
    };
    auto list = [](std::vector<double> RunConfig::* f, const char* name) {
        return ConfigKey{name,
                         [f, name](RunConfig& c, const std::string& v) { c.*f = parse_list(name, v); },
                         [f](const RunConfig& c) { return fmt_list(c.*f); }};
    };

    static const std::vector<ConfigKey> keys = {
        str(&RunConfig::data_dir, "data_dir"),
        str(&RunConfig::mnist_images, "mnist_images"),
        str(&RunConfig::mnist_labels, "mnist_labels"),
        str(&RunConfig::omniglot_dir, "omniglot_dir"),
        str(&RunConfig::features_path, "features_path"),
        str(&RunConfig::out_dir, "out_dir"),
        str(&RunConfig::instance_path, "instance_path"),
        str(&RunConfig::dataset, "dataset"),
        str(&RunConfig::scaling, "scaling"),
        str(&RunConfig::classifier, "classifier"),
        ConfigKey{"master_seed",
                  [](RunConfig& c, const std::string& v) {
                      c.master_seed = static_cast<std::uint64_t>(parse_ll("master_seed", v));
                  },
                  [](const RunConfig& c) { return std::to_string(c.master_seed); }},
        num_i(&RunConfig::workers, "workers"),
        num_i(&RunConfig::n_train_per_class, "n_train_per_class"),
        num_i(&RunConfig::n_instances, "n_instances"),
        num_i(&RunConfig::n_baseline, "n_baseline"),
        num_i(&RunConfig::n_validation, "n_validation"),
        num_i(&RunConfig::set_aside_per_class, "set_aside_per_class"),
        num_d(&RunConfig::sigma_floor, "sigma_floor"),
        flag(&RunConfig::holdout_stats, "holdout_stats"),
        flag(&RunConfig::with_nn_baseline, "with_nn_baseline"),
        num_i(&RunConfig::knn_k, "knn_k"),
        str(&RunConfig::sweep_axis, "sweep_axis"),
        list(&RunConfig::sweep_values, "sweep_values"),
        str(&RunConfig::sweep_axis2, "sweep_axis2"),
        list(&RunConfig::sweep_values2, "sweep_values2"),
        tpl_i(&NetworkTemplate::n_features, "n_features"),
        tpl_i(&NetworkTemplate::mb_ratio, "mb_ratio"),
        tpl_i(&NetworkTemplate::n_classes, "n_classes"),
        tpl_d(&NetworkTemplate::al_lateral_inhibition_strength, "al_lateral_inhibition_strength"),
        tpl_d(&NetworkTemplate::al_mb_connection_prob, "al_mb_connection_prob"),
        tpl_d(&NetworkTemplate::weight_init_low, "weight_init_low"),
        tpl_d(&NetworkTemplate::weight_init_high, "weight_init_high"),
        tpl_d(&NetworkTemplate::sparsity_fraction, "sparsity_fraction"),
        tpl_d(&NetworkTemplate::sparsity_fraction_training, "sparsity_fraction_training"),
        tpl_d(&NetworkTemplate::octopamine_level, "octopamine_level"),
        ConfigKey{"octopamine_to_mb",
                  [](RunConfig& c, const std::string& v) {
                      c.tpl.octopamine_to_mb = parse_bool("octopamine_to_mb", v);
                  },
                  [](const RunConfig& c) { return c.tpl.octopamine_to_mb ? "true" : "false"; }},
        tpl_d(&NetworkTemplate::noise_amplitude_al, "noise_amplitude_al"),
        tpl_d(&NetworkTemplate::growth_rate_pre, "growth_rate_pre"),
        tpl_d(&NetworkTemplate::growth_rate_post, "growth_rate_post"),
        tpl_d(&NetworkTemplate::decay_rate_post, "decay_rate_post"),
        tpl_d(&NetworkTemplate::weight_max, "weight_max"),
        tpl_d(&NetworkTemplate::goal, "goal"),
        tpl_i(&NetworkTemplate::n_sniffs, "n_sniffs"),
        tpl_d(&NetworkTemplate::tau, "tau"),
        tpl_d(&NetworkTemplate::dt, "dt"),
        tpl_d(&NetworkTemplate::presentation_window, "presentation_window"),
        tpl_d(&NetworkTemplate::readout_window, "readout_window"),
        sig_d(&NetworkTemplate::al_sigmoid, &SigmoidParams::max_rate, "al_sigmoid_max_rate"),
        sig_d(&NetworkTemplate::al_sigmoid, &SigmoidParams::slope, "al_sigmoid_slope"),
        sig_d(&NetworkTemplate::al_sigmoid, &SigmoidParams::offset, "al_sigmoid_offset"),
        sig_d(&NetworkTemplate::mb_sigmoid, &SigmoidParams::max_rate, "mb_sigmoid_max_rate"),
        sig_d(&NetworkTemplate::mb_sigmoid, &SigmoidParams::slope, "mb_sigmoid_slope"),
        sig_d(&NetworkTemplate::mb_sigmoid, &SigmoidParams::offset, "mb_sigmoid_offset"),
        sig_d(&NetworkTemplate::en_sigmoid, &SigmoidParams::max_rate, "en_sigmoid_max_rate"),
        sig_d(&NetworkTemplate::en_sigmoid, &SigmoidParams::slope, "en_sigmoid_slope"),
        sig_d(&NetworkTemplate::en_sigmoid, &SigmoidParams::offset, "en_sigmoid_offset"),
    };
    return keys;
}

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

/* Default-constructed config with the data directory taken from
 * MOTHNET_DATA_DIR when set. */
inline RunConfig default_config() {
    RunConfig cfg;
    if (const char* env = std::getenv("MOTHNET_DATA_DIR"); env && *env) cfg.data_dir = env;
    return cfg;
}

/* Apply one `key = value` assignment; unknown keys are rejected by name. */
inline void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& k : detail::config_keys()) {
        if (k.name == key) {
            k.set(cfg, value);
            return;
        }
    }
    throw std::invalid_argument("unknown config key: " + key);
}

/* Apply a `key=value` string (the --set flag form). */
inline void apply_config_override(RunConfig& cfg, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw std::invalid_argument("config override must look like key=value: " + assignment);
    apply_config_entry(cfg, detail::trim(assignment.substr(0, eq)),
                       detail::trim(assignment.substr(eq + 1)));
}

/* Layer a config file over cfg. An empty file leaves every default. */
inline void parse_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        lineno++;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                        ": expected key = value");
        apply_config_entry(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
}

/* Canonical listing of every key; written next to outputs so each run is
 * self-describing, and reused as the cache-key payload. */
inline std::string resolved_config_text(const RunConfig& cfg) {
    std::string out = "# mothnet resolved config v1\n";
    for (const auto& k : detail::config_keys()) out += k.name + " = " + k.get(cfg) + "\n";
    return out;
}

/* The preprocessing-relevant slice of the resolved config; feature caches
 * are keyed by the hash of this string plus the raw file contents. */
inline std::string resolved_preprocess_tag(const RunConfig& cfg) {
    std::string out = "dataset=" + cfg.dataset + ";scaling=" + cfg.scaling +
                      ";n_features=" + std::to_string(cfg.tpl.n_features) +
                      ";set_aside_per_class=" + std::to_string(cfg.set_aside_per_class) +
                      ";preprocess_seed=" +
                      std::to_string(derive_seed(cfg.master_seed, "preprocess"));
    return out;
}

}  // namespace mothnet
