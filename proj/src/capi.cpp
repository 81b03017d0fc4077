#include "dbp/dbp.h"

#include <charconv>
#include <cmath>
#include <cstring>
#include <exception>
#include <filesystem>
#include <limits>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "dbp/errors.hpp"
#include "dbp/image.hpp"
#include "dbp/io.hpp"
#include "dbp/metrics.hpp"
#include "dbp/phantom.hpp"
#include "dbp/pipeline.hpp"
#include "dbp/projection.hpp"

struct dbp_image {
    dbp::Image value;
};

struct dbp_sinogram {
    dbp::Sinogram value;
};

struct dbp_model {
    dbp::nn::Model value;
    dbp::io::Metadata metadata;
};

struct dbp_dataset {
    std::vector<dbp::TrainingScan> scans;
};

struct dbp_report {
    dbp::MetricsReport value;
};

namespace {

thread_local std::string g_last_error;

std::size_t parse_count(const std::string& text, const std::string& key) {
    std::size_t value = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || end != text.data() + text.size() || value == 0) {
        throw dbp::FormatError("metadata", 0, "checkpoint " + key + " '" + text + "' is not a positive integer");
    }
    return value;
}

dbp_status fail(dbp_status status, const std::string& message) {
    g_last_error = message;
    return status;
}

template <typename F>
dbp_status guarded(F&& body) {
    try {
        body();
        g_last_error.clear();
        return DBP_OK;
    } catch (const dbp::FormatError& e) {
        return fail(DBP_ERR_FORMAT, e.what());
    } catch (const dbp::InvalidInput& e) {
        return fail(DBP_ERR_INVALID_ARGUMENT, e.what());
    } catch (const dbp::UsageError& e) {
        return fail(DBP_ERR_USAGE, e.what());
    } catch (const dbp::NumericalError& e) {
        return fail(DBP_ERR_NUMERICAL, e.what());
    } catch (const dbp::IoError& e) {
        return fail(DBP_ERR_IO, e.what());
    } catch (const std::bad_alloc&) {
        return fail(DBP_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(DBP_ERR_INTERNAL, e.what());
    }
}

void require(const void* p, const char* name) {
    if (p == nullptr) throw dbp::InvalidInput(std::string(name) + " must not be null");
}

dbp_status not_found(const char* path) {
    return fail(DBP_ERR_NOT_FOUND, std::string("missing file '") + path + "'");
}

dbp::TrainConfig to_cpp(const dbp_train_config& c) {
    dbp::TrainConfig out;
    out.epochs = c.epochs;
    out.batch_size = c.batch_size;
    out.lr_start = c.lr_start;
    out.lr_end = c.lr_end;
    out.patches_per_scan = c.patches_per_scan;
    out.patch_size = c.patch_size;
    out.depth = c.depth;
    out.width = c.width;
    out.seed = c.seed;
    out.preset = c.preset == DBP_PRESET_PAPER ? dbp::Preset::Paper : dbp::Preset::Lite;
    return out;
}

dbp::ProjectionGeometry geometry_for(std::size_t size) { return dbp::ProjectionGeometry::square(size); }

}  // namespace

extern "C" {

const char* dbp_last_error(void) { return g_last_error.c_str(); }

const char* dbp_status_name(dbp_status status) {
    switch (status) {
        case DBP_OK: return "ok";
        case DBP_ERR_INVALID_ARGUMENT: return "invalid argument";
        case DBP_ERR_USAGE: return "usage error";
        case DBP_ERR_NUMERICAL: return "numerical failure";
        case DBP_ERR_IO: return "i/o error";
        case DBP_ERR_FORMAT: return "format error";
        case DBP_ERR_NOT_FOUND: return "not found";
        case DBP_ERR_INTERNAL: return "internal error";
    }
    return "unknown";
}

dbp_status dbp_image_create(size_t size, const double* values, dbp_image** out) {
    return guarded([&] {
        require(out, "out");
        dbp::Image image(size);
        if (values != nullptr) std::memcpy(image.data().data(), values, image.pixel_count() * sizeof(double));
        *out = new dbp_image{std::move(image)};
    });
}

void dbp_image_free(dbp_image* image) { delete image; }

size_t dbp_image_size(const dbp_image* image) { return image ? image->value.size() : 0; }

const double* dbp_image_data(const dbp_image* image) { return image ? image->value.data().data() : nullptr; }

dbp_status dbp_image_save(const dbp_image* image, const char* path) {
    return guarded([&] {
        require(image, "image");
        require(path, "path");
        dbp::io::save_image(path, image->value);
    });
}

dbp_status dbp_image_load(const char* path, dbp_image** out) {
    if (path != nullptr && !std::filesystem::exists(path)) return not_found(path);
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new dbp_image{dbp::io::load_image(path)};
    });
}

dbp_phantom_spec dbp_phantom_spec_default(void) {
    const dbp::PhantomSpec s;
    return {s.size, s.grain_min, s.grain_max, s.intensity_min, s.intensity_max, s.seed};
}

dbp_status dbp_phantom_generate(const dbp_phantom_spec* spec, dbp_image** out) {
    return guarded([&] {
        require(spec, "spec");
        require(out, "out");
        dbp::PhantomSpec s;
        s.size = spec->size;
        s.grain_min = spec->grain_min;
        s.grain_max = spec->grain_max;
        s.intensity_min = spec->intensity_min;
        s.intensity_max = spec->intensity_max;
        s.seed = spec->seed;
        *out = new dbp_image{dbp::generate_phantom(s)};
    });
}

dbp_status dbp_uniform_angles(size_t views, double* out) {
    return guarded([&] {
        require(out, "out");
        const auto angles = dbp::uniform_angles(views);
        std::copy(angles.begin(), angles.end(), out);
    });
}

void dbp_sinogram_free(dbp_sinogram* sino) { delete sino; }

size_t dbp_sinogram_channels(const dbp_sinogram* sino) { return sino ? sino->value.channels() : 0; }

size_t dbp_sinogram_views(const dbp_sinogram* sino) { return sino ? sino->value.views() : 0; }

const double* dbp_sinogram_data(const dbp_sinogram* sino) { return sino ? sino->value.data().data() : nullptr; }

const double* dbp_sinogram_angles(const dbp_sinogram* sino) { return sino ? sino->value.angles().data() : nullptr; }

dbp_status dbp_sinogram_save(const dbp_sinogram* sino, const char* path) {
    return guarded([&] {
        require(sino, "sinogram");
        require(path, "path");
        dbp::io::save_sinogram(path, sino->value);
    });
}

dbp_status dbp_sinogram_load(const char* path, const double* angles, size_t views, dbp_sinogram** out) {
    if (path != nullptr && !std::filesystem::exists(path)) return not_found(path);
    return guarded([&] {
        require(path, "path");
        require(angles, "angles");
        require(out, "out");
        *out = new dbp_sinogram{dbp::io::load_sinogram(path, std::span<const double>(angles, views))};
    });
}

dbp_status dbp_angles_save(const double* angles, size_t views, const char* path) {
    return guarded([&] {
        require(angles, "angles");
        require(path, "path");
        const std::span<const double> values(angles, views);
        dbp::validate_angles(values);
        dbp::io::save_vector(path, values);
    });
}

dbp_status dbp_angles_load(const char* path, double* out, size_t capacity, size_t* count) {
    if (path != nullptr && !std::filesystem::exists(path)) return not_found(path);
    return guarded([&] {
        require(path, "path");
        require(count, "count");
        const auto values = dbp::io::load_vector(path);
        dbp::validate_angles(values);
        *count = values.size();
        if (out != nullptr) std::copy_n(values.begin(), std::min(capacity, values.size()), out);
    });
}

dbp_status dbp_radon(const dbp_image* image, const double* angles, size_t views, dbp_sinogram** out) {
    return guarded([&] {
        require(image, "image");
        require(angles, "angles");
        require(out, "out");
        const auto geometry = geometry_for(image->value.size());
        *out = new dbp_sinogram{dbp::radon(image->value, std::span<const double>(angles, views), geometry)};
    });
}

dbp_status dbp_fbp(const dbp_sinogram* sino, dbp_image** out) {
    return guarded([&] {
        require(sino, "sinogram");
        require(out, "out");
        *out = new dbp_image{dbp::fbp(sino->value, geometry_for(sino->value.channels()))};
    });
}

dbp_status dbp_export_pgm(const dbp_image* const* panels, size_t count, const char* path) {
    return guarded([&] {
        require(panels, "panels");
        require(path, "path");
        std::vector<dbp::Image> images;
        images.reserve(count);
        for (size_t i = 0; i < count; ++i) {
            require(panels[i], "panel");
            images.push_back(panels[i]->value);
        }
        dbp::io::export_pgm(path, images);
    });
}

dbp_status dbp_dataset_create(dbp_dataset** out) {
    return guarded([&] {
        require(out, "out");
        *out = new dbp_dataset{};
    });
}

void dbp_dataset_free(dbp_dataset* dataset) { delete dataset; }

dbp_status dbp_dataset_add(dbp_dataset* dataset, int scan_id, const dbp_sinogram* sino, const dbp_image* phantom) {
    return guarded([&] {
        require(dataset, "dataset");
        require(sino, "sinogram");
        require(phantom, "phantom");
        if (sino->value.channels() != phantom->value.size()) {
            throw dbp::InvalidInput("sinogram has " + std::to_string(sino->value.channels()) +
                                    " channels but the phantom is " + std::to_string(phantom->value.size()) + " wide");
        }
        for (const auto& scan : dataset->scans) {
            if (scan.scan_id == scan_id) throw dbp::InvalidInput("duplicate scan id " + std::to_string(scan_id));
        }
        dataset->scans.push_back({scan_id, sino->value, phantom->value});
    });
}

dbp_status dbp_train_config_preset(dbp_preset preset, dbp_train_config* out) {
    return guarded([&] {
        require(out, "out");
        if (preset != DBP_PRESET_LITE && preset != DBP_PRESET_PAPER) throw dbp::InvalidInput("unknown preset");
        const auto c = dbp::TrainConfig::for_preset(preset == DBP_PRESET_PAPER ? dbp::Preset::Paper : dbp::Preset::Lite);
        *out = {c.epochs, c.batch_size, c.lr_start, c.lr_end, c.patches_per_scan, c.patch_size,
                c.depth,  c.width,      c.seed,     preset};
    });
}

dbp_status dbp_train(const dbp_dataset* dataset, size_t train_count, const dbp_train_config* config,
                     dbp_epoch_callback on_epoch, void* user, dbp_model** out) {
    return guarded([&] {
        require(dataset, "dataset");
        require(config, "config");
        require(out, "out");
        if (dataset->scans.empty()) throw dbp::InvalidInput("dataset is empty");
        std::vector<int> ids;
        for (const auto& scan : dataset->scans) ids.push_back(scan.scan_id);
        const auto manifest = dbp::SplitManifest::ordered(ids, train_count);
        const auto geometry = geometry_for(dataset->scans.front().phantom.size());
        dbp::EpochCallback callback;
        if (on_epoch != nullptr) {
            callback = [&](const dbp::EpochLog& e) { on_epoch(e.epoch, e.lr, e.mean_loss, user); };
        }
        auto result = dbp::train(dataset->scans, manifest, to_cpp(*config), geometry, callback);
        *out = new dbp_model{std::move(result.model), {{"patch_size", std::to_string(config->patch_size)}}};
    });
}

void dbp_model_free(dbp_model* model) { delete model; }

size_t dbp_model_views(const dbp_model* model) { return model ? model->value.config().views : 0; }

size_t dbp_model_depth(const dbp_model* model) { return model ? model->value.config().depth : 0; }

size_t dbp_model_width(const dbp_model* model) { return model ? model->value.config().width : 0; }

dbp_status dbp_model_save(const dbp_model* model, const char* extra_metadata, const char* path) {
    return guarded([&] {
        require(model, "model");
        require(path, "path");
        dbp::io::Metadata metadata = model->metadata;
        if (extra_metadata != nullptr) {
            std::istringstream lines(extra_metadata);
            std::string line;
            while (std::getline(lines, line)) {
                if (line.empty()) continue;
                const auto eq = line.find('=');
                if (eq == std::string::npos || eq == 0) throw dbp::InvalidInput("metadata line '" + line + "' is not key=value");
                metadata[line.substr(0, eq)] = line.substr(eq + 1);
            }
        }
        dbp::io::save_checkpoint(path, model->value, metadata);
    });
}

dbp_status dbp_model_load(const char* path, dbp_model** out) {
    if (path != nullptr && !std::filesystem::exists(path)) return not_found(path);
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        auto checkpoint = dbp::io::load_checkpoint(path);
        *out = new dbp_model{std::move(checkpoint.model), std::move(checkpoint.metadata)};
    });
}

const char* dbp_model_metadata(const dbp_model* model, const char* key) {
    if (model == nullptr || key == nullptr) return nullptr;
    const auto it = model->metadata.find(key);
    return it == model->metadata.end() ? nullptr : it->second.c_str();
}

dbp_status dbp_model_reconstruct(const dbp_model* model, const dbp_sinogram* sino, dbp_image** out) {
    return guarded([&] {
        require(model, "model");
        require(sino, "sinogram");
        require(out, "out");
        std::size_t tile = 8;
        if (const auto it = model->metadata.find("patch_size"); it != model->metadata.end()) {
            tile = parse_count(it->second, "patch_size");
        }
        *out = new dbp_image{
            dbp::reconstruct_dbp(sino->value, model->value, geometry_for(sino->value.channels()), tile)};
    });
}

dbp_status dbp_psnr(const dbp_image* a, const dbp_image* b, double* out) {
    return guarded([&] {
        require(a, "a");
        require(b, "b");
        require(out, "out");
        *out = dbp::psnr(a->value, b->value);
    });
}

dbp_status dbp_ssim(const dbp_image* a, const dbp_image* b, double* out) {
    return guarded([&] {
        require(a, "a");
        require(b, "b");
        require(out, "out");
        *out = dbp::ssim(a->value, b->value);
    });
}

dbp_status dbp_report_create(dbp_report** out) {
    return guarded([&] {
        require(out, "out");
        *out = new dbp_report{};
    });
}

void dbp_report_free(dbp_report* report) { delete report; }

dbp_status dbp_report_add(dbp_report* report, int scan_id, const char* method, const dbp_image* pred,
                          const dbp_image* truth) {
    return guarded([&] {
        require(report, "report");
        require(method, "method");
        require(pred, "prediction");
        require(truth, "truth");
        report->value.add({scan_id, method, dbp::psnr(pred->value, truth->value), dbp::ssim(pred->value, truth->value)});
    });
}

dbp_status dbp_report_aggregate(const dbp_report* report, const char* method, size_t* count, double* psnr_mean,
                                double* psnr_std, double* ssim_mean, double* ssim_std) {
    return guarded([&] {
        require(report, "report");
        require(method, "method");
        const auto a = report->value.aggregate(method);
        const double nan = std::numeric_limits<double>::quiet_NaN();
        if (count) *count = a.count;
        if (psnr_mean) *psnr_mean = a.psnr_mean;
        if (psnr_std) *psnr_std = a.psnr_std.value_or(nan);
        if (ssim_mean) *ssim_mean = a.ssim_mean;
        if (ssim_std) *ssim_std = a.ssim_std.value_or(nan);
    });
}

dbp_status dbp_report_write(const dbp_report* report, const char* path) {
    return guarded([&] {
        require(report, "report");
        require(path, "path");
        const std::string text = report->value.to_csv();
        dbp::io::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    });
}

}  // extern "C"
