#pragma once
// Dataset ingestion and preprocessing: IDX parsing, crop/downsample,
// mean-subtraction against a set-aside pool, active-pixel selection,
// vectorization, per-sample scaling, Gaussian smearing for binary Omniglot
// images, and seeded experiment-pool draws.
//
// The whole pipeline is a pure function of (raw files, seed, config); it
// uses no transcendental math, so feature matrices are bit-stable across
// platforms and checksummable.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mothnet/image_io.hpp"
#include "mothnet/rng.hpp"
#include "mothnet/sde.hpp"

namespace mothnet {

enum class ImageSource { Mnist, Omniglot };
enum class ScalingMode { BySum, ByPercentile };

inline constexpr double kSumScaleTarget = 6.0;         // by_sum: per-sample feature total
inline constexpr double kPercentileScaleTarget = 0.5;  // by_percentile: 90th-percentile value
inline constexpr int kDefaultSetAsidePerClass = 50;

inline std::string to_string(ScalingMode m) {
    return m == ScalingMode::BySum ? "by_sum" : "by_percentile";
}
inline std::string to_string(ImageSource s) {
    return s == ImageSource::Mnist ? "mnist" : "omniglot";
}

struct RawImageSet {
    int height = 0;
    int width = 0;
    std::vector<std::vector<std::uint8_t>> images;  // row-major, height*width each
    std::vector<int> labels;
    ImageSource source = ImageSource::Mnist;

    int n_classes() const {
        int n = 0;
        for (int l : labels) n = std::max(n, l + 1);
        return n;
    }
};

/* ------------------------------------------------------------------ */
/* IDX files (the standard MNIST distribution format)                  */
/* ------------------------------------------------------------------ */

struct IdxFile {
    std::uint32_t magic = 0;     // e.g. 2051 for ubyte rank-3, 2049 for ubyte rank-1
    std::vector<int> dims;       // one entry per dimension, outermost first
    std::vector<std::uint8_t> data;  // row-major payload
};

/* Parse an IDX file: big-endian magic (0x0000, type code, rank), big-endian
 * 32-bit dimensions, unsigned-byte payload. Throws on bad magic or a
 * truncated payload; never yields a partial dataset. */
inline IdxFile read_idx(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_idx: cannot open " + path);

    auto read_u32 = [&in, &path]() {
        unsigned char b[4];
        in.read(reinterpret_cast<char*>(b), 4);
        if (in.gcount() != 4) throw std::runtime_error("read_idx: truncated header in " + path);
        return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
               (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
    };

    IdxFile f;
    f.magic = read_u32();
    if ((f.magic >> 16) != 0) throw std::runtime_error("read_idx: bad magic in " + path);
    const int type = (f.magic >> 8) & 0xff;
    const int rank = f.magic & 0xff;
    if (type != 0x08) throw std::runtime_error("read_idx: only ubyte IDX files are supported: " + path);
    if (rank < 1 || rank > 3) throw std::runtime_error("read_idx: unsupported rank in " + path);

    std::size_t total = 1;
    for (int d = 0; d < rank; d++) {
        auto n = read_u32();
        f.dims.push_back(static_cast<int>(n));
        total *= n;
    }
    f.data.resize(total);
    in.read(reinterpret_cast<char*>(f.data.data()), static_cast<std::streamsize>(total));
    if (in.gcount() != static_cast<std::streamsize>(total))
        throw std::runtime_error("read_idx: truncated payload in " + path);
    return f;
}

/* Load an images/labels IDX pair into a RawImageSet. */
inline RawImageSet load_mnist(const std::string& images_path, const std::string& labels_path) {
    IdxFile imgs = read_idx(images_path);
    IdxFile labs = read_idx(labels_path);
    if (imgs.dims.size() != 3)
        throw std::runtime_error("load_mnist: image file must be rank 3: " + images_path);
    if (labs.dims.size() != 1)
        throw std::runtime_error("load_mnist: label file must be rank 1: " + labels_path);
    if (imgs.dims[0] != labs.dims[0])
        throw std::runtime_error("load_mnist: image/label count mismatch");

    RawImageSet raw;
    raw.source = ImageSource::Mnist;
    raw.height = imgs.dims[1];
    raw.width = imgs.dims[2];
    const std::size_t px = static_cast<std::size_t>(raw.height) * raw.width;
    raw.images.reserve(imgs.dims[0]);
    raw.labels.reserve(imgs.dims[0]);
    for (int i = 0; i < imgs.dims[0]; i++) {
        auto begin = imgs.data.begin() + static_cast<std::ptrdiff_t>(i * px);
        raw.images.emplace_back(begin, begin + static_cast<std::ptrdiff_t>(px));
        raw.labels.push_back(labs.data[i]);
    }
    return raw;
}

/* Load an Omniglot-style directory: each immediate subdirectory is one
 * class (sorted by name), holding PNG or PGM images (sorted by name). */
inline RawImageSet load_omniglot_dir(const std::string& root) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root))
        throw std::runtime_error("load_omniglot_dir: not a directory: " + root);

    std::vector<fs::path> class_dirs;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory()) class_dirs.push_back(e.path());
    std::sort(class_dirs.begin(), class_dirs.end());
    if (class_dirs.empty())
        throw std::runtime_error("load_omniglot_dir: no class subdirectories in " + root);

    RawImageSet raw;
    raw.source = ImageSource::Omniglot;
    for (std::size_t c = 0; c < class_dirs.size(); c++) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(class_dirs[c]))
            if (e.is_regular_file()) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            GrayImage img = read_gray_image(f.string());
            if (raw.images.empty()) {
                raw.height = img.height;
                raw.width = img.width;
            } else if (img.height != raw.height || img.width != raw.width) {
                throw std::runtime_error("load_omniglot_dir: inconsistent image size in " +
                                         f.string());
            }
            raw.images.push_back(std::move(img.pixels));
            raw.labels.push_back(static_cast<int>(c));
        }
    }
    return raw;
}

/* ------------------------------------------------------------------ */
/* Geometry: crop/downsample and Gaussian smear                        */
/* ------------------------------------------------------------------ */

/* Crop a 2-pixel border from a 28x28 image (-> 24x24), then downsample 2x by
 * averaging each 2x2 block (-> 12x12). Block averaging preserves constants
 * and is alignment-free. */
inline Matrix crop_downsample(const Matrix& img) {
    if (img.rows() != 28 || img.cols() != 28)
        throw std::invalid_argument("crop_downsample: input must be 28x28");
    Matrix out(12, 12);
    for (int r = 0; r < 12; r++)
        for (int c = 0; c < 12; c++)
            out(r, c) = img.block(2 + 2 * r, 2 + 2 * c, 2, 2).mean();
    return out;
}

/* Zero-padded convolution with a normalized 2-D Gaussian kernel (std
 * sigma_px, truncated at 3 std). Interior pixels keep total intensity; the
 * input must be binary (two distinct levels at most) unless strict=false. */
inline Matrix smear_binary(const Matrix& img, double sigma_px = 2.0, bool strict = true) {
    if (!(sigma_px > 0.0)) throw std::invalid_argument("smear_binary: sigma must be > 0");
    if (strict) {
        double lo = img.minCoeff(), hi = img.maxCoeff();
        for (Eigen::Index i = 0; i < img.size(); i++) {
            double v = *(img.data() + i);
            if (v != lo && v != hi)
                throw std::invalid_argument("smear_binary: non-binary input in strict mode");
        }
    }

    const int radius = static_cast<int>(std::ceil(3.0 * sigma_px));
    const int ksize = 2 * radius + 1;
    Matrix kernel(ksize, ksize);
    for (int r = 0; r < ksize; r++)
        for (int c = 0; c < ksize; c++) {
            double dr = r - radius, dc = c - radius;
            kernel(r, c) = std::exp(-(dr * dr + dc * dc) / (2.0 * sigma_px * sigma_px));
        }
    kernel /= kernel.sum();

    Matrix out = Matrix::Zero(img.rows(), img.cols());
    for (int r = 0; r < img.rows(); r++)
        for (int c = 0; c < img.cols(); c++) {
            double acc = 0.0;
            for (int kr = -radius; kr <= radius; kr++) {
                int rr = r + kr;
                if (rr < 0 || rr >= img.rows()) continue;
                for (int kc = -radius; kc <= radius; kc++) {
                    int cc = c + kc;
                    if (cc < 0 || cc >= img.cols()) continue;
                    acc += img(rr, cc) * kernel(kr + radius, kc + radius);
                }
            }
            out(r, c) = acc;
        }
    return out;
}

/* Omniglot geometry: 105x105 -> centered 102x102 crop -> 6x6 block average
 * -> 17x17 grid, whose 15x15 interior can host 200 retained pixels. */
inline Matrix downsample_omniglot(const Matrix& img) {
    if (img.rows() != 105 || img.cols() != 105)
        throw std::invalid_argument("downsample_omniglot: input must be 105x105");
    Matrix out(17, 17);
    for (int r = 0; r < 17; r++)
        for (int c = 0; c < 17; c++)
            out(r, c) = img.block(1 + 6 * r, 1 + 6 * c, 6, 6).mean();
    return out;
}

/* ------------------------------------------------------------------ */
/* Feature dataset                                                     */
/* ------------------------------------------------------------------ */

struct PreprocessManifest {
    std::uint64_t seed = 0;
    ImageSource source = ImageSource::Mnist;
    int set_aside_per_class = kDefaultSetAsidePerClass;
    std::vector<int> set_aside_ids;  // raw sample indices consumed by preprocessing
};

struct FeatureDataset {
    Matrix features;              // n_samples x n_features; set-aside rows excluded
    std::vector<int> labels;      // per row
    std::vector<int> raw_indices; // per row, index into the original RawImageSet
    std::vector<int> pixel_mask;  // retained pixel indices into the grid, ascending
    int grid_height = 0;
    int grid_width = 0;
    ScalingMode scaling_mode = ScalingMode::BySum;
    PreprocessManifest manifest;

    int n_samples() const { return static_cast<int>(features.rows()); }
    int n_features() const { return static_cast<int>(features.cols()); }
    int n_classes() const {
        int n = 0;
        for (int l : labels) n = std::max(n, l + 1);
        return n;
    }
};

namespace detail {

/* Downsampled grid for one raw image, per source geometry. */
inline Matrix to_grid(const RawImageSet& raw, std::size_t i) {
    Matrix img(raw.height, raw.width);
    for (int r = 0; r < raw.height; r++)
        for (int c = 0; c < raw.width; c++)
            img(r, c) = static_cast<double>(raw.images[i][static_cast<std::size_t>(r) * raw.width + c]);
    if (raw.source == ImageSource::Mnist) return crop_downsample(img);
    return downsample_omniglot(smear_binary(img, 2.0, /*strict=*/false));
}

/* Union of per-class top-k most-active interior pixels, with k grown until
 * at least n_features pixels are covered; an overshooting final increment is
 * trimmed to exactly n_features by ascending pixel index. */
inline std::vector<int> select_active_pixels(const std::vector<Matrix>& class_means,
                                             int grid_h, int grid_w, int n_features) {
    std::vector<int> interior;
    for (int r = 1; r < grid_h - 1; r++)
        for (int c = 1; c < grid_w - 1; c++) interior.push_back(r * grid_w + c);
    if (n_features > static_cast<int>(interior.size()))
        throw std::invalid_argument("select_active_pixels: n_features exceeds " +
                                    std::to_string(interior.size()) + " interior pixels");

    /* Per class, interior pixels ranked by mean activity (desc, index asc). */
    std::vector<std::vector<int>> ranking(class_means.size(), interior);
    for (std::size_t c = 0; c < class_means.size(); c++) {
        const Matrix& m = class_means[c];
        std::stable_sort(ranking[c].begin(), ranking[c].end(), [&](int a, int b) {
            double va = m(a / grid_w, a % grid_w), vb = m(b / grid_w, b % grid_w);
            return va > vb || (va == vb && a < b);
        });
    }

    std::vector<char> chosen(static_cast<std::size_t>(grid_h) * grid_w, 0);
    int n_chosen = 0;
    for (int k = 0; k < static_cast<int>(interior.size()); k++) {
        std::vector<int> added;
        for (const auto& rank : ranking) {
            int px = rank[k];
            if (!chosen[px]) {
                chosen[px] = 1;
                n_chosen++;
                added.push_back(px);
            }
        }
        if (n_chosen >= n_features) {
            if (n_chosen > n_features) {
                std::sort(added.begin(), added.end());
                while (n_chosen > n_features) {
                    chosen[added.back()] = 0;
                    added.pop_back();
                    n_chosen--;
                }
            }
            break;
        }
    }

    std::vector<int> mask;
    for (std::size_t px = 0; px < chosen.size(); px++)
        if (chosen[px]) mask.push_back(static_cast<int>(px));
    return mask;
}

}  // namespace detail

/* Build the vectorized feature dataset:
 *   (a) set aside set_aside_per_class samples per class (seeded draw),
 *       mean-subtract their pixel-wise mean from every image, clamp at 0;
 *   (b) retain the most-active interior pixels from the set-aside class
 *       averages (union of per-class top-k, grown to exactly n_features);
 *   (c) vectorize retained pixels in ascending index order;
 *   (d) scale per sample: by_sum fixes the feature total, by_percentile
 *       fixes the 90th-percentile value (nearest-rank); identically-zero
 *       samples stay zero.
 * Set-aside samples are consumed by preprocessing and excluded from the
 * emitted rows. */
inline FeatureDataset build_feature_dataset(const RawImageSet& raw, int n_features,
                                            ScalingMode scaling, std::uint64_t seed,
                                            int set_aside_per_class = kDefaultSetAsidePerClass) {
    if (raw.images.empty()) throw std::invalid_argument("build_feature_dataset: empty image set");
    if (set_aside_per_class < 1)
        throw std::invalid_argument("build_feature_dataset: set_aside_per_class must be >= 1");
    const int n_classes = raw.n_classes();

    std::vector<std::vector<int>> by_class(n_classes);
    for (std::size_t i = 0; i < raw.images.size(); i++)
        by_class[raw.labels[i]].push_back(static_cast<int>(i));
    for (int c = 0; c < n_classes; c++)
        if (static_cast<int>(by_class[c].size()) < set_aside_per_class + 1)
            throw std::invalid_argument("build_feature_dataset: class " + std::to_string(c) +
                                        " too small for the set-aside pool");

    /* Seeded set-aside draw, classes in ascending order. */
    Rng rng(derive_seed(seed, "set_aside"));
    std::vector<char> is_set_aside(raw.images.size(), 0);
    std::vector<int> set_aside_ids;
    for (int c = 0; c < n_classes; c++) {
        std::vector<int> pool = by_class[c];
        rng.shuffle(pool);
        for (int k = 0; k < set_aside_per_class; k++) {
            is_set_aside[pool[k]] = 1;
            set_aside_ids.push_back(pool[k]);
        }
    }
    std::sort(set_aside_ids.begin(), set_aside_ids.end());

    std::vector<Matrix> grids(raw.images.size());
    for (std::size_t i = 0; i < raw.images.size(); i++) grids[i] = detail::to_grid(raw, i);
    const int gh = static_cast<int>(grids[0].rows());
    const int gw = static_cast<int>(grids[0].cols());

    Matrix mean_img = Matrix::Zero(gh, gw);
    for (int id : set_aside_ids) mean_img += grids[id];
    mean_img /= static_cast<double>(set_aside_ids.size());

    for (auto& g : grids) g = (g - mean_img).cwiseMax(0.0);

    std::vector<Matrix> class_means(n_classes, Matrix::Zero(gh, gw));
    std::vector<int> class_counts(n_classes, 0);
    for (int id : set_aside_ids) {
        class_means[raw.labels[id]] += grids[id];
        class_counts[raw.labels[id]]++;
    }
    for (int c = 0; c < n_classes; c++) class_means[c] /= static_cast<double>(class_counts[c]);

    FeatureDataset ds;
    ds.grid_height = gh;
    ds.grid_width = gw;
    ds.scaling_mode = scaling;
    ds.pixel_mask = detail::select_active_pixels(class_means, gh, gw, n_features);
    ds.manifest.seed = seed;
    ds.manifest.source = raw.source;
    ds.manifest.set_aside_per_class = set_aside_per_class;
    ds.manifest.set_aside_ids = set_aside_ids;

    const int n_rows = static_cast<int>(raw.images.size()) - static_cast<int>(set_aside_ids.size());
    ds.features.resize(n_rows, n_features);
    ds.labels.reserve(n_rows);
    ds.raw_indices.reserve(n_rows);
    int row = 0;
    for (std::size_t i = 0; i < raw.images.size(); i++) {
        if (is_set_aside[i]) continue;
        for (int f = 0; f < n_features; f++) {
            int px = ds.pixel_mask[f];
            ds.features(row, f) = grids[i](px / gw, px % gw);
        }
        ds.labels.push_back(raw.labels[i]);
        ds.raw_indices.push_back(static_cast<int>(i));
        row++;
    }

    for (int r = 0; r < ds.features.rows(); r++) {
        if (scaling == ScalingMode::BySum) {
            double s = ds.features.row(r).sum();
            if (s > 0.0) ds.features.row(r) *= kSumScaleTarget / s;
        } else {
            /* nearest-rank 90th percentile */
            std::vector<double> vals(ds.features.row(r).begin(), ds.features.row(r).end());
            std::sort(vals.begin(), vals.end());
            auto idx = static_cast<std::size_t>(
                std::ceil(0.9 * static_cast<double>(vals.size()))) - 1;
            double p90 = vals[idx];
            if (p90 > 0.0) ds.features.row(r) *= kPercentileScaleTarget / p90;
        }
    }
    return ds;
}

/* Order-independent checksum input: canonical little-endian bytes of the
 * feature matrix (row-major) and labels. */
inline std::uint64_t dataset_checksum(const FeatureDataset& ds) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix_bytes = [&h](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; i++) {
            h ^= b[i];
            h *= 0x100000001b3ull;
        }
    };
    for (int r = 0; r < ds.features.rows(); r++)
        for (int c = 0; c < ds.features.cols(); c++) {
            double v = ds.features(r, c);
            mix_bytes(&v, sizeof v);
        }
    for (int l : ds.labels) {
        std::int32_t v = l;
        mix_bytes(&v, sizeof v);
    }
    return h;
}

/* ------------------------------------------------------------------ */
/* Experiment pools                                                    */
/* ------------------------------------------------------------------ */

struct ExperimentPools {
    std::vector<int> baseline;    // dataset row indices, class-major order
    std::vector<int> training;    // randomized presentation order
    std::vector<int> validation;  // class-major order
};

/* Draw disjoint baseline/training/validation pools (rows per class drawn
 * without replacement, seeded). Training order is randomized across
 * classes. */
inline ExperimentPools draw_experiment_pools(const FeatureDataset& ds, int n_train_per_class,
                                             int n_baseline = 15, int n_validation = 15,
                                             std::uint64_t seed = 0) {
    if (n_train_per_class < 0) throw std::invalid_argument("draw_experiment_pools: negative N");
    const int n_classes = ds.n_classes();
    std::vector<std::vector<int>> by_class(n_classes);
    for (int r = 0; r < ds.n_samples(); r++) by_class[ds.labels[r]].push_back(r);

    Rng rng(derive_seed(seed, "pools"));
    ExperimentPools pools;
    for (int c = 0; c < n_classes; c++) {
        const int need = n_baseline + n_validation + n_train_per_class;
        if (static_cast<int>(by_class[c].size()) < need)
            throw std::invalid_argument("draw_experiment_pools: class " + std::to_string(c) +
                                        " has fewer than " + std::to_string(need) + " samples");
        std::vector<int> pool = by_class[c];
        rng.shuffle(pool);
        pools.baseline.insert(pools.baseline.end(), pool.begin(), pool.begin() + n_baseline);
        pools.validation.insert(pools.validation.end(), pool.begin() + n_baseline,
                                pool.begin() + n_baseline + n_validation);
        pools.training.insert(pools.training.end(), pool.begin() + n_baseline + n_validation,
                              pool.begin() + need);
    }
    rng.shuffle(pools.training);
    return pools;
}

}  // namespace mothnet
