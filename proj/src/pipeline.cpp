#include "dbp/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>

#include "dbp/errors.hpp"
#include "dbp/nn/adam.hpp"
#include "dbp/random.hpp"

namespace dbp {

namespace {

// Stream ids for derive_seed. Patch streams use the (non-negative) scan id.
constexpr std::uint64_t kInitStream = 0xA0000000ULL;
constexpr std::uint64_t kShuffleStream = 0xB0000000ULL;

std::string shortest(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

nn::Tensor4 gather_inputs(std::span<const PatchPair> patches, std::span<const std::size_t> order) {
    const std::size_t views = patches.front().views;
    const std::size_t p = patches.front().patch;
    nn::Tensor4 batch({order.size(), views, p, p});
    auto dst = batch.data();
    for (std::size_t b = 0; b < order.size(); ++b) {
        const auto& src = patches[order[b]].input;
        std::copy(src.begin(), src.end(), dst.begin() + static_cast<long>(b * src.size()));
    }
    return batch;
}

nn::Tensor4 gather_targets(std::span<const PatchPair> patches, std::span<const std::size_t> order) {
    const std::size_t p = patches.front().patch;
    nn::Tensor4 batch({order.size(), 1, p, p});
    auto dst = batch.data();
    for (std::size_t b = 0; b < order.size(); ++b) {
        const auto& src = patches[order[b]].target;
        std::copy(src.begin(), src.end(), dst.begin() + static_cast<long>(b * src.size()));
    }
    return batch;
}

}  // namespace

std::string to_string(Preset preset) { return preset == Preset::Paper ? "paper" : "lite"; }

Preset parse_preset(const std::string& name) {
    if (name == "lite") return Preset::Lite;
    if (name == "paper") return Preset::Paper;
    throw InvalidInput("unknown preset '" + name + "' (expected lite or paper)");
}

TrainConfig TrainConfig::lite() { return TrainConfig{}; }

TrainConfig TrainConfig::paper() {
    TrainConfig c;
    c.epochs = 50;
    c.batch_size = 128;
    c.patches_per_scan = 3200;
    c.depth = 15;
    c.width = 64;
    c.preset = Preset::Paper;
    return c;
}

TrainConfig TrainConfig::for_preset(Preset preset) { return preset == Preset::Paper ? paper() : lite(); }

void TrainConfig::validate() const {
    if (epochs == 0) throw InvalidInput("epochs must be at least 1");
    if (batch_size < 2) throw InvalidInput("batch size must be at least 2 for batch normalization");
    if (!(lr_end > 0.0) || !(lr_start >= lr_end)) throw InvalidInput("learning rates need lr_start >= lr_end > 0");
    if (patches_per_scan == 0) throw InvalidInput("patches per scan must be at least 1");
    if (patch_size < 3) throw InvalidInput("patch size must be at least 3");
    if (width == 0) throw InvalidInput("network width must be positive");
}

SplitManifest SplitManifest::ordered(std::vector<int> ids, std::size_t train_count) {
    std::sort(ids.begin(), ids.end());
    if (train_count > ids.size()) throw InvalidInput("train count exceeds the number of scans");
    SplitManifest m;
    m.train_ids.assign(ids.begin(), ids.begin() + static_cast<long>(train_count));
    m.test_ids.assign(ids.begin() + static_cast<long>(train_count), ids.end());
    return m;
}

bool SplitManifest::is_train(int id) const {
    return std::find(train_ids.begin(), train_ids.end(), id) != train_ids.end();
}

void SplitManifest::validate(std::span<const int> dataset_ids) const {
    std::set<int> train(train_ids.begin(), train_ids.end());
    std::set<int> test(test_ids.begin(), test_ids.end());
    if (train.size() != train_ids.size() || test.size() != test_ids.size()) {
        throw InvalidInput("split manifest repeats a scan id");
    }
    for (int id : test) {
        if (train.count(id)) throw InvalidInput("scan " + std::to_string(id) + " is in both train and test sets");
    }
    std::set<int> all(dataset_ids.begin(), dataset_ids.end());
    std::set<int> covered = train;
    covered.insert(test.begin(), test.end());
    if (covered != all) throw InvalidInput("split manifest does not cover exactly the dataset's scans");
}

std::pair<std::size_t, std::size_t> dihedral_source(Dihedral t, std::size_t i, std::size_t j, std::size_t size) {
    const std::size_t m = size - 1;
    switch (t) {
        case Dihedral::Identity: return {i, j};
        case Dihedral::Rotate90: return {j, m - i};
        case Dihedral::Rotate180: return {m - i, m - j};
        case Dihedral::Rotate270: return {m - j, i};
        case Dihedral::FlipHorizontal: return {i, m - j};
        case Dihedral::FlipVertical: return {m - i, j};
        case Dihedral::Transpose: return {j, i};
        case Dihedral::AntiTranspose: return {m - j, m - i};
    }
    throw InvalidInput("unknown dihedral transform");
}

void apply_dihedral(Dihedral t, std::span<const double> in, std::span<double> out, std::size_t size) {
    if (in.size() != size * size || out.size() != size * size) throw InvalidInput("apply_dihedral size mismatch");
    for (std::size_t i = 0; i < size; ++i) {
        for (std::size_t j = 0; j < size; ++j) {
            const auto [si, sj] = dihedral_source(t, i, j, size);
            out[i * size + j] = in[si * size + sj];
        }
    }
}

std::vector<PatchPair> extract_patches(const BpTensor& z, const Image& x, std::size_t count, std::size_t patch,
                                       std::uint64_t seed, int scan_id) {
    if (count == 0) throw InvalidInput("patch count must be at least 1");
    if (patch == 0 || patch > x.size()) {
        throw InvalidInput("patch size " + std::to_string(patch) + " exceeds image size " + std::to_string(x.size()));
    }
    if (z.size() != x.size()) throw InvalidInput("back-projection tensor and image sizes differ");

    const std::size_t n = x.size();
    const std::size_t area = patch * patch;
    const std::uint64_t origins = n - patch + 1;
    Rng rng(seed);
    std::vector<double> window(area);

    std::vector<PatchPair> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        PatchPair pair;
        pair.scan_id = scan_id;
        pair.row = static_cast<std::size_t>(rng.below(origins));
        pair.col = static_cast<std::size_t>(rng.below(origins));
        pair.transform = static_cast<Dihedral>(rng.below(kDihedralCount));
        pair.views = z.views();
        pair.patch = patch;
        pair.input.resize(z.views() * area);
        pair.target.resize(area);

        for (std::size_t j = 0; j < z.views(); ++j) {
            const auto slab = z.slab(j);
            for (std::size_t r = 0; r < patch; ++r)
                for (std::size_t c = 0; c < patch; ++c) window[r * patch + c] = slab[(pair.row + r) * n + pair.col + c];
            apply_dihedral(pair.transform, window,
                           std::span<double>(pair.input).subspan(j * area, area), patch);
        }
        for (std::size_t r = 0; r < patch; ++r)
            for (std::size_t c = 0; c < patch; ++c) window[r * patch + c] = x.at(pair.row + r, pair.col + c);
        apply_dihedral(pair.transform, window, pair.target, patch);
        out.push_back(std::move(pair));
    }
    return out;
}

double lr_schedule(std::size_t epoch, const TrainConfig& config) {
    if (epoch >= config.epochs) {
        throw UsageError("epoch " + std::to_string(epoch) + " is outside [0, " + std::to_string(config.epochs) + ")");
    }
    if (config.epochs == 1) return config.lr_start;
    const double fraction = static_cast<double>(epoch) / static_cast<double>(config.epochs - 1);
    return config.lr_start * std::pow(config.lr_end / config.lr_start, fraction);
}

std::string format_log_line(const EpochLog& entry) {
    return std::to_string(entry.epoch) + "," + shortest(entry.lr) + "," + shortest(entry.mean_loss);
}

TrainResult train(std::span<const TrainingScan> dataset, const SplitManifest& manifest, const TrainConfig& config,
                  const ProjectionGeometry& geometry, const EpochCallback& on_epoch) {
    config.validate();
    std::vector<int> ids;
    for (const auto& scan : dataset) ids.push_back(scan.scan_id);
    manifest.validate(ids);
    if (manifest.train_ids.empty()) throw InvalidInput("no training scans");

    std::vector<PatchPair> patches;
    std::size_t views = 0;
    for (const auto& scan : dataset) {
        if (!manifest.is_train(scan.scan_id)) continue;
        if (scan.scan_id < 0) throw InvalidInput("scan ids must be non-negative");
        if (views == 0) views = scan.sinogram.views();
        if (scan.sinogram.views() != views) throw InvalidInput("training scans differ in view count");
        const BpTensor z = build_bp_tensor(scan.sinogram, geometry);
        auto scan_patches = extract_patches(z, scan.phantom, config.patches_per_scan, config.patch_size,
                                            derive_seed(config.seed, static_cast<std::uint64_t>(scan.scan_id)),
                                            scan.scan_id);
        std::move(scan_patches.begin(), scan_patches.end(), std::back_inserter(patches));
    }

    if (patches.size() < 2) throw InvalidInput("need at least 2 training patches");

    TrainResult result{nn::Model::initialized({views, config.width, config.depth}, derive_seed(config.seed, kInitStream)),
                       {}, {}};
    std::set<int> consumed;
    auto params = result.model.parameters();
    nn::AdamState adam = nn::AdamState::for_parameters(params);

    std::vector<std::size_t> order(patches.size());
    nn::ForwardTrace trace;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = lr_schedule(epoch, config);
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle(derive_seed(config.seed, kShuffleStream + epoch));
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.below(i))]);
        }

        double loss_sum = 0.0;
        std::size_t seen = 0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start + 2 <= order.size(); start += config.batch_size, ++batch_index) {
            const std::size_t size = std::min(config.batch_size, order.size() - start);
            const std::span<const std::size_t> batch(order.data() + start, size);
            for (std::size_t idx : batch) {
                const int id = patches[idx].scan_id;
                if (!manifest.is_train(id)) {
                    throw UsageError("patch from non-training scan " + std::to_string(id) + " reached the optimizer");
                }
                consumed.insert(id);
            }

            const nn::Tensor4 input = gather_inputs(patches, batch);
            const nn::Tensor4 target = gather_targets(patches, batch);
            const nn::Tensor4 output = nn::forward_train(input, result.model, trace);
            const nn::Loss loss = nn::mse_loss(output, target);
            const std::string where = " at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index);
            if (!std::isfinite(loss.value)) throw NumericalError("training diverged: non-finite loss" + where);

            const auto grads = nn::backward(result.model, trace, loss.grad);
            try {
                nn::adam_step(params, grads, adam, lr);
            } catch (const NumericalError& e) {
                throw NumericalError(std::string(e.what()) + where);
            }
            loss_sum += loss.value * static_cast<double>(size);
            seen += size;
        }

        const EpochLog entry{epoch, lr, loss_sum / static_cast<double>(seen)};
        result.log.push_back(entry);
        if (on_epoch) on_epoch(entry);
    }
    result.consumed_scan_ids.assign(consumed.begin(), consumed.end());
    return result;
}

Image reconstruct_dbp(const Sinogram& sino, const nn::Model& model, const ProjectionGeometry& geometry,
                      std::size_t tile) {
    if (sino.views() != model.config().views) {
        throw InvalidInput("sinogram has " + std::to_string(sino.views()) + " views, model expects " +
                           std::to_string(model.config().views));
    }
    const std::size_t n = geometry.image_size;
    if (tile == 0 || tile > n) {
        throw InvalidInput("tile " + std::to_string(tile) + " does not fit a " + std::to_string(n) + " image");
    }
    const BpTensor z = build_bp_tensor(sino, geometry);

    // Tile origins step by `tile`; the last one is pulled back to end at the border.
    std::vector<std::size_t> origins;
    for (std::size_t o = 0; o + tile < n; o += tile) origins.push_back(o);
    origins.push_back(n - tile);

    const std::size_t views = z.views();
    const std::size_t count = origins.size() * origins.size();
    nn::Tensor4 batch({count, views, tile, tile});
    auto in = batch.data();
    std::size_t b = 0;
    for (std::size_t r0 : origins) {
        for (std::size_t c0 : origins) {
            for (std::size_t v = 0; v < views; ++v) {
                const auto slab = z.slab(v);
                double* dst = in.data() + (b * views + v) * tile * tile;
                for (std::size_t i = 0; i < tile; ++i) {
                    std::copy_n(slab.data() + (r0 + i) * n + c0, tile, dst + i * tile);
                }
            }
            ++b;
        }
    }
    const nn::Tensor4 out = nn::network_forward(batch, model);

    Image image(n);
    const auto src = out.data();
    b = 0;
    for (std::size_t r0 : origins) {
        for (std::size_t c0 : origins) {
            for (std::size_t i = 0; i < tile; ++i) {
                for (std::size_t j = 0; j < tile; ++j) {
                    image.at(r0 + i, c0 + j) = std::clamp(src[b * tile * tile + i * tile + j], 0.0, 1.0);
                }
            }
            ++b;
        }
    }
    return image;
}

}  // namespace dbp
