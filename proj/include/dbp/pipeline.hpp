#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dbp/image.hpp"
#include "dbp/nn/model.hpp"
#include "dbp/projection.hpp"

namespace dbp {

enum class Preset { Lite, Paper };

std::string to_string(Preset preset);
Preset parse_preset(const std::string& name);

struct TrainConfig {
    std::size_t epochs = 15;
    std::size_t batch_size = 64;
    double lr_start = 1e-3;
    double lr_end = 1e-5;
    std::size_t patches_per_scan = 250;
    std::size_t patch_size = 8;
    std::size_t depth = 5;
    std::size_t width = 32;
    std::uint64_t seed = 0;
    Preset preset = Preset::Lite;

    /// Desk scale: 5 middle blocks of width 32, 20000 patches over 80 scans,
    /// 15 epochs, batch 64.
    static TrainConfig lite();
    /// Full protocol: 15 middle blocks of width 64, 3200 patches per scan
    /// (256000 over 80 scans), 50 epochs, batch 128.
    static TrainConfig paper();
    static TrainConfig for_preset(Preset preset);

    void validate() const;
};

/// Train/test partition of scan ids.
struct SplitManifest {
    std::vector<int> train_ids;
    std::vector<int> test_ids;

    /// First `train_count` ids in ascending order train, the rest test.
    static SplitManifest ordered(std::vector<int> ids, std::size_t train_count);

    bool is_train(int id) const;
    /// Disjoint, and the union equals `dataset_ids`.
    void validate(std::span<const int> dataset_ids) const;
};

/// The 8 symmetries of the square, applied as out(i, j) = in(source(i, j)).
enum class Dihedral : std::uint8_t {
    Identity,
    Rotate90,
    Rotate180,
    Rotate270,
    FlipHorizontal,
    FlipVertical,
    Transpose,
    AntiTranspose,
};

inline constexpr std::size_t kDihedralCount = 8;

/// Source pixel of output pixel (i, j) in a size x size square.
std::pair<std::size_t, std::size_t> dihedral_source(Dihedral t, std::size_t i, std::size_t j, std::size_t size);

/// Applies `t` to one size x size plane.
void apply_dihedral(Dihedral t, std::span<const double> in, std::span<double> out, std::size_t size);

/// Aligned training window: `input` holds views planes of patch x patch from the
/// back-projection tensor, `target` the same window of the clean image, both
/// under the same transform. (row, col) is the untransformed window origin.
struct PatchPair {
    int scan_id = 0;
    std::size_t row = 0;
    std::size_t col = 0;
    Dihedral transform = Dihedral::Identity;
    std::size_t views = 0;
    std::size_t patch = 0;
    std::vector<double> input;
    std::vector<double> target;
};

/// Uniform window origins and uniform dihedral transforms, deterministic in `seed`.
std::vector<PatchPair> extract_patches(const BpTensor& z, const Image& x, std::size_t count, std::size_t patch,
                                       std::uint64_t seed, int scan_id = 0);

/// lr_start * (lr_end / lr_start)^(epoch / (epochs - 1)).
double lr_schedule(std::size_t epoch, const TrainConfig& config);

struct TrainingScan {
    int scan_id = 0;
    Sinogram sinogram;
    Image phantom;
};

struct EpochLog {
    std::size_t epoch = 0;
    double lr = 0.0;
    double mean_loss = 0.0;
};

/// `epoch,lr,mean_loss`.
std::string format_log_line(const EpochLog& entry);

struct TrainResult {
    nn::Model model;
    std::vector<EpochLog> log;
    std::vector<int> consumed_scan_ids;  // scan id of every patch used, sorted and unique
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Mini-batch Adam on the mean squared error over patches of the training scans.
/// Deterministic for a given config.seed.
TrainResult train(std::span<const TrainingScan> dataset, const SplitManifest& manifest, const TrainConfig& config,
                  const ProjectionGeometry& geometry, const EpochCallback& on_epoch = {});

/// Stacked single-view back projections through the network, clamped to [0, 1].
/// The network sees tile x tile windows, the same footprint as its training patches;
/// whole-image inference puts it outside the distribution it was fitted on.
Image reconstruct_dbp(const Sinogram& sino, const nn::Model& model, const ProjectionGeometry& geometry,
                      std::size_t tile = 8);

}  // namespace dbp
