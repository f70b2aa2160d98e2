// MothNet command-line front end.
//
// Subcommands: preprocess, train, evaluate, sweep, timecourse, baseline.
// Configuration precedence: --flags > --set overrides > config file >
// MOTHNET_DATA_DIR > built-in defaults. Every run writes its fully resolved
// config next to its outputs; failures leave a FAILED marker in the output
// directory so partial results are recognizable.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mothnet/mothnet.hpp"

namespace fs = std::filesystem;
using namespace mothnet;

namespace {

struct CommonFlags {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> workers;
    std::optional<std::string> dataset;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "Config file (key = value lines)");
    cmd->add_option("--set", flags.overrides, "Override a config key (key=value, repeatable)");
    cmd->add_option("--seed", flags.seed, "Master seed");
    cmd->add_option("--out", flags.out_dir, "Output directory");
    cmd->add_option("--workers", flags.workers, "Worker threads");
    cmd->add_option("--dataset", flags.dataset, "Dataset: mnist or omniglot")
        ->check(CLI::IsMember({"mnist", "omniglot"}));
}

RunConfig resolve_config(const CommonFlags& flags) {
    RunConfig cfg = default_config();
    if (!flags.config_path.empty()) parse_config_file(cfg, flags.config_path);
    for (const auto& o : flags.overrides) apply_config_override(cfg, o);
    if (flags.seed) cfg.master_seed = *flags.seed;
    if (flags.out_dir) cfg.out_dir = *flags.out_dir;
    if (flags.workers) cfg.workers = *flags.workers;
    if (flags.dataset) cfg.dataset = *flags.dataset;
    cfg.validate();
    return cfg;
}

void write_resolved_config(const RunConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    std::ofstream out(cfg.out_dir + "/config_resolved.cfg");
    out << resolved_config_text(cfg);
}

std::uint64_t file_checksum(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<char> buf(std::istreambuf_iterator<char>(in), {});
    return fnv1a64(buf.data(), buf.size());
}

/* Preprocessing cache key: content hash of the raw inputs plus every
 * preprocessing-relevant config value. */
std::string cache_path(const RunConfig& cfg) {
    std::uint64_t h = fnv1a64(resolved_preprocess_tag(cfg));
    if (cfg.dataset == "mnist") {
        h = derive_seed(h, file_checksum(cfg.resolved_mnist_images()),
                        file_checksum(cfg.resolved_mnist_labels()));
    } else {
        h = derive_seed(h, fnv1a64(cfg.omniglot_dir));
    }
    char hex[32];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return cfg.data_dir + "/cache/features_" + cfg.dataset + "_" + cfg.scaling + "_" + hex +
           ".tsv";
}

FeatureDataset load_or_build_features(const RunConfig& cfg, bool force_rebuild = false) {
    std::string path = cfg.features_path.empty() ? cache_path(cfg) : cfg.features_path;
    if (!force_rebuild && fs::exists(path)) return read_feature_dataset(path);

    RawImageSet raw = cfg.dataset == "mnist"
                          ? load_mnist(cfg.resolved_mnist_images(), cfg.resolved_mnist_labels())
                          : load_omniglot_dir(cfg.omniglot_dir);
    FeatureDataset ds =
        build_feature_dataset(raw, cfg.tpl.n_features, cfg.scaling_mode(),
                              derive_seed(cfg.master_seed, "preprocess"), cfg.set_aside_per_class);
    fs::create_directories(fs::path(path).parent_path());
    write_feature_dataset(ds, path);
    write_manifest(ds, path + ".manifest");
    std::cout << "features: " << path << " (" << ds.n_samples() << " samples x "
              << ds.n_features() << " features, checksum " << std::hex << dataset_checksum(ds)
              << std::dec << ")\n";
    return ds;
}

int cmd_preprocess(const RunConfig& cfg) {
    write_resolved_config(cfg);
    FeatureDataset ds = load_or_build_features(cfg, /*force_rebuild=*/true);
    std::cout << "pixel mask size: " << ds.pixel_mask.size() << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    write_resolved_config(cfg);
    FeatureDataset ds = load_or_build_features(cfg);
    ExperimentConfig ecfg = cfg.experiment();

    const std::uint64_t inst_seed = derive_seed(cfg.master_seed, "instance", "", 0.0, "", 0.0, 0);
    const std::uint64_t pool_seed = derive_seed(cfg.master_seed, "pools", "", 0.0, "", 0.0, 0);
    auto pools = draw_experiment_pools(ds, cfg.n_train_per_class, cfg.n_baseline,
                                       cfg.n_validation, pool_seed);
    NetworkInstance inst = generate_instance(cfg.tpl, inst_seed);
    InstanceResult res = run_stage_protocol(inst, ds, pools, ecfg);

    std::cout << "baseline accuracy  loglik=" << res.baseline_acc_loglik
              << " softmax=" << res.baseline_acc_softmax << "\n";
    std::cout << "post-training      loglik=" << res.post_acc_loglik
              << " softmax=" << res.post_acc_softmax << "\n";
    std::cout << "learning_focus=" << res.learning_focus << " snr=" << res.snr << "\n";

    ExperimentResult result;
    result.points.push_back({"none", 0.0, "", 0.0, {res}});
    write_results_table(result, cfg.out_dir + "/results.tsv", cfg.master_seed);
    if (!cfg.instance_path.empty()) {
        save_instance(inst, cfg.instance_path);
        std::cout << "instance saved: " << cfg.instance_path << "\n";
    }
    return 0;
}

int cmd_evaluate(const RunConfig& cfg) {
    if (cfg.instance_path.empty())
        throw std::invalid_argument("evaluate: instance_path must point at a saved instance");
    write_resolved_config(cfg);
    NetworkInstance inst = load_instance(cfg.instance_path);
    RunConfig data_cfg = cfg;
    data_cfg.tpl.n_features = inst.tpl.n_features;  // features must match the instance
    FeatureDataset ds = load_or_build_features(data_cfg);

    const std::uint64_t pool_seed = derive_seed(cfg.master_seed, "pools", "", 0.0, "", 0.0, 0);
    auto pools =
        draw_experiment_pools(ds, 0, cfg.n_baseline, cfg.n_validation, pool_seed);

    Rng rng(derive_seed(cfg.master_seed, "evaluate"));
    std::vector<EnResponseRecord> records;
    for (int row : pools.validation)
        records.push_back(present_sample(ds.features.row(row).transpose(), inst, 0.0,
                                         inst.tpl.sparsity_fraction, rng, ds.labels[row],
                                         Phase::Validation)
                              .record);
    ResponseStats stats = fit_stats(records, cfg.sigma_floor);
    int ok_ll = 0, ok_sm = 0;
    for (const auto& r : records) {
        ok_ll += loglik_predict(r.responses, stats).label == r.sample_class;
        ok_sm += softmax_predict(r.responses).label == r.sample_class;
    }
    const double n = static_cast<double>(records.size());
    std::cout << "evaluation accuracy  loglik=" << ok_ll / n << " softmax=" << ok_sm / n
              << " (on " << records.size() << " samples)\n";
    return 0;
}

int cmd_sweep(const RunConfig& cfg) {
    write_resolved_config(cfg);
    FeatureDataset ds = load_or_build_features(cfg);
    ExperimentResult result = run_sweep(ds, cfg.experiment());
    write_results_table(result, cfg.out_dir + "/results.tsv", cfg.master_seed);
    write_summary_table(result, cfg.out_dir + "/summary.tsv");
    write_confusion_matrices(result, cfg.out_dir + "/confusion.tsv");
    write_fig_plot_data(result, cfg.out_dir);
    std::cout << "sweep complete: " << result.points.size() << " points x "
              << cfg.n_instances << " instances -> " << cfg.out_dir << "/results.tsv\n";
    return 0;
}

int cmd_timecourse(const RunConfig& cfg) {
    write_resolved_config(cfg);
    FeatureDataset ds = load_or_build_features(cfg);
    ExperimentConfig ecfg = cfg.experiment();

    const std::uint64_t inst_seed = derive_seed(cfg.master_seed, "instance", "", 0.0, "", 0.0, 0);
    const std::uint64_t pool_seed = derive_seed(cfg.master_seed, "pools", "", 0.0, "", 0.0, 0);
    auto pools = draw_experiment_pools(ds, cfg.n_train_per_class, cfg.n_baseline,
                                       cfg.n_validation, pool_seed);
    NetworkInstance inst = generate_instance(cfg.tpl, inst_seed);
    auto rows = emit_timecourses(inst, ds, pools, ecfg);
    write_timecourses(rows, cfg.out_dir + "/timecourses.tsv");
    if (!cfg.instance_path.empty()) save_instance(inst, cfg.instance_path);
    std::cout << "timecourses: " << rows.size() << " rows -> " << cfg.out_dir
              << "/timecourses.tsv\n";
    return 0;
}

int cmd_baseline(const RunConfig& cfg) {
    write_resolved_config(cfg);
    FeatureDataset ds = load_or_build_features(cfg);
    std::ofstream out(cfg.out_dir + "/baseline.tsv");
    out << "# mothnet-nn-baseline v1\n";
    out << "n_train_per_class\tinstance\taccuracy\n";
    double sum = 0.0;
    for (int i = 0; i < cfg.n_instances; i++) {
        const std::uint64_t pool_seed =
            derive_seed(cfg.master_seed, "pools", "", 0.0, "", 0.0, i);
        auto pools = draw_experiment_pools(ds, cfg.n_train_per_class, cfg.n_baseline,
                                           cfg.n_validation, pool_seed);
        double acc = nearest_neighbor_baseline(ds, pools.training, pools.validation, cfg.knn_k);
        out << cfg.n_train_per_class << "\t" << i << "\t" << acc << "\n";
        sum += acc;
    }
    std::cout << "nearest-neighbor accuracy (mean over " << cfg.n_instances
              << " pool draws): " << sum / cfg.n_instances << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MothNet: moth-olfactory-network few-shot learning simulator"};
    app.require_subcommand(1);

    CommonFlags flags;
    const char* names[] = {"preprocess", "train", "evaluate", "sweep", "timecourse", "baseline"};
    const char* descs[] = {
        "Build the vectorized feature dataset and write the cache + manifest",
        "Train a single moth instance; optionally save it (instance_path)",
        "Score a saved instance on a freshly drawn evaluation set",
        "Run a parameter sweep and emit tidy/summary/plot tables",
        "Emit pre/post-training EN timecourses over the validation set",
        "Score the nearest-neighbor reference on the same feature data"};
    for (int i = 0; i < 6; i++) add_common_flags(app.add_subcommand(names[i], descs[i]), flags);

    CLI11_PARSE(app, argc, argv);
    std::string cmd = app.get_subcommands().front()->get_name();

    RunConfig cfg;
    try {
        cfg = resolve_config(flags);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (cmd == "preprocess") return cmd_preprocess(cfg);
        if (cmd == "train") return cmd_train(cfg);
        if (cmd == "evaluate") return cmd_evaluate(cfg);
        if (cmd == "sweep") return cmd_sweep(cfg);
        if (cmd == "timecourse") return cmd_timecourse(cfg);
        if (cmd == "baseline") return cmd_baseline(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        std::error_code ec;
        fs::create_directories(cfg.out_dir, ec);
        std::ofstream marker(cfg.out_dir + "/FAILED");
        marker << e.what() << "\n";
        return 1;
    }
    return 2;
}
