// dbp: dataset generation, projection, FBP and learned reconstruction, evaluation.
// Every stage reads its predecessors' files from a data directory and writes its own.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dbp/dbp.h"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kOther = 1, kUsage = 2, kMissing = 3, kNumerical = 4 };

struct Failure {
    int code;
    std::string message;
};

int exit_code_for(dbp_status s) {
    switch (s) {
        case DBP_OK: return kOk;
        case DBP_ERR_NOT_FOUND: return kMissing;
        case DBP_ERR_NUMERICAL: return kNumerical;
        case DBP_ERR_INVALID_ARGUMENT:
        case DBP_ERR_USAGE: return kUsage;
        default: return kOther;
    }
}

void check(dbp_status s) {
    if (s != DBP_OK) throw Failure{exit_code_for(s), dbp_last_error()};
}

template <typename T, void (*Free)(T*)>
struct Deleter {
    void operator()(T* p) const { Free(p); }
};
using ImagePtr = std::unique_ptr<dbp_image, Deleter<dbp_image, dbp_image_free>>;
using SinoPtr = std::unique_ptr<dbp_sinogram, Deleter<dbp_sinogram, dbp_sinogram_free>>;
using ModelPtr = std::unique_ptr<dbp_model, Deleter<dbp_model, dbp_model_free>>;
using DatasetPtr = std::unique_ptr<dbp_dataset, Deleter<dbp_dataset, dbp_dataset_free>>;
using ReportPtr = std::unique_ptr<dbp_report, Deleter<dbp_report, dbp_report_free>>;

std::string scan_file(const std::string& prefix, int id, const char* ext = ".dbpt") {
    char name[64];
    std::snprintf(name, sizeof name, "%s_%04d%s", prefix.c_str(), id, ext);
    return name;
}

// Ids of every `<prefix>_NNNN.dbpt` in dir, ascending.
std::vector<int> scan_ids(const fs::path& dir, const std::string& prefix) {
    if (!fs::is_directory(dir)) throw Failure{kMissing, "missing directory '" + dir.string() + "'"};
    const std::regex pattern(prefix + "_([0-9]{4})\\.dbpt");
    std::vector<int> ids;
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::smatch m;
        const std::string name = entry.path().filename().string();
        if (std::regex_match(name, m, pattern)) ids.push_back(std::stoi(m[1].str()));
    }
    if (ids.empty()) {
        throw Failure{kMissing, "missing input: no " + prefix + "_XXXX.dbpt files in '" + dir.string() + "'"};
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

// The first missing file of a stage's inputs, if any.
void require_inputs(const fs::path& dir, const std::vector<std::string>& prefixes, const std::vector<int>& ids) {
    for (int id : ids) {
        for (const auto& prefix : prefixes) {
            const fs::path p = dir / scan_file(prefix, id);
            if (!fs::exists(p)) throw Failure{kMissing, "missing file '" + p.string() + "'"};
        }
    }
}

ImagePtr load_image(const fs::path& p) {
    dbp_image* raw = nullptr;
    check(dbp_image_load(p.string().c_str(), &raw));
    return ImagePtr(raw);
}

std::vector<double> load_angles(const fs::path& dir) {
    const std::string path = (dir / "angles.dbpt").string();
    std::size_t count = 0;
    check(dbp_angles_load(path.c_str(), nullptr, 0, &count));
    std::vector<double> angles(count);
    check(dbp_angles_load(path.c_str(), angles.data(), angles.size(), &count));
    return angles;
}

SinoPtr load_sinogram(const fs::path& dir, int id, const std::vector<double>& angles) {
    dbp_sinogram* raw = nullptr;
    check(dbp_sinogram_load((dir / scan_file("sino", id)).string().c_str(), angles.data(), angles.size(), &raw));
    return SinoPtr(raw);
}

std::string num(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

// Merges `stage.key=value` lines into dir/config.txt, replacing that stage's previous entries.
void record_config(const fs::path& dir, const std::string& stage, const std::map<std::string, std::string>& values) {
    std::map<std::string, std::string> merged;
    const fs::path path = dir / "config.txt";
    if (std::ifstream in{path}) {
        std::string line;
        while (std::getline(in, line)) {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            std::string key = line.substr(0, eq);
            if (key.rfind(stage + ".", 0) == 0) continue;
            merged[std::move(key)] = line.substr(eq + 1);
        }
    }
    for (const auto& [k, v] : values) merged[stage + "." + k] = v;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    for (const auto& [k, v] : merged) out << k << '=' << v << '\n';
    if (!out) throw Failure{kOther, "cannot write '" + path.string() + "'"};
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw Failure{kOther, "cannot create directory '" + dir.string() + "'"};
}

struct GenData {
    std::string out;
    std::size_t count = 100;
    std::size_t size = 64;
    std::uint64_t seed = 0;
    std::string grains = "6:14";
};

int run_gen_data(const GenData& o) {
    dbp_phantom_spec spec = dbp_phantom_spec_default();
    spec.size = o.size;
    const auto colon = o.grains.find(':');
    try {
        if (colon == std::string::npos) throw std::invalid_argument("no colon");
        spec.grain_min = std::stoul(o.grains.substr(0, colon));
        spec.grain_max = std::stoul(o.grains.substr(colon + 1));
    } catch (const std::exception&) {
        throw Failure{kUsage, "--grains must look like LO:HI, got '" + o.grains + "'"};
    }
    if (o.count == 0 || o.count > 10000) throw Failure{kUsage, "--count must be in [1, 10000]"};
    ensure_dir(o.out);
    for (std::size_t k = 0; k < o.count; ++k) {
        spec.seed = o.seed + k;
        dbp_image* raw = nullptr;
        check(dbp_phantom_generate(&spec, &raw));
        ImagePtr image(raw);
        check(dbp_image_save(image.get(), (fs::path(o.out) / scan_file("phantom", static_cast<int>(k))).string().c_str()));
    }
    record_config(o.out, "gen-data", {{"count", std::to_string(o.count)},
                                      {"size", std::to_string(o.size)},
                                      {"seed", std::to_string(o.seed)},
                                      {"grains", std::to_string(spec.grain_min) + ":" + std::to_string(spec.grain_max)}});
    std::cout << "wrote " << o.count << " phantoms to " << o.out << '\n';
    return kOk;
}

int run_project(const std::string& data, std::size_t views) {
    const fs::path dir(data);
    const auto ids = scan_ids(dir, "phantom");
    if (views == 0) throw Failure{kUsage, "--views must be at least 1"};
    std::vector<double> angles(views);
    check(dbp_uniform_angles(views, angles.data()));
    check(dbp_angles_save(angles.data(), views, (dir / "angles.dbpt").string().c_str()));
    for (int id : ids) {
        const auto phantom = load_image(dir / scan_file("phantom", id));
        dbp_sinogram* raw = nullptr;
        check(dbp_radon(phantom.get(), angles.data(), views, &raw));
        SinoPtr sino(raw);
        check(dbp_sinogram_save(sino.get(), (dir / scan_file("sino", id)).string().c_str()));
    }
    record_config(dir, "project", {{"views", std::to_string(views)}});
    std::cout << "projected " << ids.size() << " scans at " << views << " views\n";
    return kOk;
}

int run_fbp(const std::string& data) {
    const fs::path dir(data);
    const auto ids = scan_ids(dir, "phantom");
    require_inputs(dir, {"sino"}, ids);
    const auto angles = load_angles(dir);
    for (int id : ids) {
        const auto sino = load_sinogram(dir, id, angles);
        dbp_image* raw = nullptr;
        check(dbp_fbp(sino.get(), &raw));
        ImagePtr image(raw);
        check(dbp_image_save(image.get(), (dir / scan_file("fbp", id)).string().c_str()));
    }
    record_config(dir, "fbp", {{"filter", "ram-lak"}, {"views", std::to_string(angles.size())}});
    std::cout << "reconstructed " << ids.size() << " scans with FBP\n";
    return kOk;
}

struct Train {
    std::string data;
    std::string out;
    std::string preset = "lite";
    std::size_t train_count = 80;
    std::optional<std::size_t> epochs, patches_per_scan, depth, width, batch_size;
    std::optional<std::uint64_t> seed;
};

struct LogSink {
    std::ofstream file;
};

void on_epoch(std::size_t epoch, double lr, double mean_loss, void* user) {
    auto* sink = static_cast<LogSink*>(user);
    const std::string line = std::to_string(epoch) + "," + num(lr) + "," + num(mean_loss);
    sink->file << line << '\n';
    sink->file.flush();
    std::cout << "epoch " << line << '\n' << std::flush;
}

int run_train(const Train& o) {
    const fs::path dir(o.data);
    const auto ids = scan_ids(dir, "phantom");
    require_inputs(dir, {"sino"}, ids);
    const auto angles = load_angles(dir);
    if (o.train_count == 0 || o.train_count > ids.size()) {
        throw Failure{kUsage, "--train-count " + std::to_string(o.train_count) + " is outside [1, " +
                                  std::to_string(ids.size()) + "]"};
    }

    dbp_train_config config{};
    check(dbp_train_config_preset(o.preset == "paper" ? DBP_PRESET_PAPER : DBP_PRESET_LITE, &config));
    if (o.epochs) config.epochs = *o.epochs;
    if (o.patches_per_scan) config.patches_per_scan = *o.patches_per_scan;
    if (o.depth) config.depth = *o.depth;
    if (o.width) config.width = *o.width;
    if (o.batch_size) config.batch_size = *o.batch_size;
    if (o.seed) config.seed = *o.seed;

    dbp_dataset* raw_ds = nullptr;
    check(dbp_dataset_create(&raw_ds));
    DatasetPtr dataset(raw_ds);
    std::size_t size = 0;
    for (std::size_t k = 0; k < o.train_count; ++k) {
        const int id = ids[k];
        const auto phantom = load_image(dir / scan_file("phantom", id));
        const auto sino = load_sinogram(dir, id, angles);
        size = dbp_image_size(phantom.get());
        check(dbp_dataset_add(dataset.get(), id, sino.get(), phantom.get()));
    }

    const fs::path model_path(o.out);
    const fs::path out_dir = model_path.has_parent_path() ? model_path.parent_path() : fs::path(".");
    ensure_dir(out_dir);
    LogSink sink{std::ofstream(out_dir / "train_log.txt", std::ios::binary | std::ios::trunc)};
    if (!sink.file) throw Failure{kOther, "cannot write '" + (out_dir / "train_log.txt").string() + "'"};
    sink.file << "epoch,lr,mean_loss\n";

    dbp_model* raw_model = nullptr;
    check(dbp_train(dataset.get(), o.train_count, &config, on_epoch, &sink, &raw_model));
    ModelPtr model(raw_model);

    const std::map<std::string, std::string> resolved{
        {"preset", o.preset},
        {"epochs", std::to_string(config.epochs)},
        {"batch_size", std::to_string(config.batch_size)},
        {"lr_start", num(config.lr_start)},
        {"lr_end", num(config.lr_end)},
        {"patches_per_scan", std::to_string(config.patches_per_scan)},
        {"patch_size", std::to_string(config.patch_size)},
        {"depth", std::to_string(config.depth)},
        {"width", std::to_string(config.width)},
        {"seed", std::to_string(config.seed)},
        {"train_count", std::to_string(o.train_count)},
        {"views", std::to_string(angles.size())},
        {"size", std::to_string(size)},
    };
    std::string metadata;
    for (const auto& [k, v] : resolved) {
        if (k != "depth" && k != "width" && k != "views") metadata += k + "=" + v + "\n";
    }
    check(dbp_model_save(model.get(), metadata.c_str(), o.out.c_str()));
    record_config(out_dir, "train", resolved);
    std::cout << "saved model to " << o.out << '\n';
    return kOk;
}

int run_infer(const std::string& model_path, const std::string& data) {
    dbp_model* raw = nullptr;
    check(dbp_model_load(model_path.c_str(), &raw));
    ModelPtr model(raw);
    const fs::path dir(data);
    const auto ids = scan_ids(dir, "phantom");
    require_inputs(dir, {"sino"}, ids);
    const auto angles = load_angles(dir);
    if (angles.size() != dbp_model_views(model.get())) {
        throw Failure{kUsage, "view mismatch: checkpoint expects " + std::to_string(dbp_model_views(model.get())) +
                                  " views but the data has " + std::to_string(angles.size())};
    }
    for (int id : ids) {
        const auto sino = load_sinogram(dir, id, angles);
        dbp_image* img = nullptr;
        check(dbp_model_reconstruct(model.get(), sino.get(), &img));
        ImagePtr image(img);
        check(dbp_image_save(image.get(), (dir / scan_file("dbp", id)).string().c_str()));
    }
    record_config(dir, "infer", {{"depth", std::to_string(dbp_model_depth(model.get()))},
                                 {"width", std::to_string(dbp_model_width(model.get()))},
                                 {"views", std::to_string(angles.size())}});
    std::cout << "reconstructed " << ids.size() << " scans with the network\n";
    return kOk;
}

struct Eval {
    std::string data;
    std::string report;
    bool export_pgm = false;
    std::size_t train_count = 80;
};

std::string aggregate_line(const dbp_report* report, const char* method) {
    std::size_t n = 0;
    double pm, ps, sm, ss;
    check(dbp_report_aggregate(report, method, &n, &pm, &ps, &sm, &ss));
    const auto pm_std = [](double mean, double sd) {
        char buf[64];
        if (std::isnan(sd)) {
            std::snprintf(buf, sizeof buf, "%.2f +- n/a", mean);
        } else {
            std::snprintf(buf, sizeof buf, "%.2f +- %.2f", mean, sd);
        }
        return std::string(buf);
    };
    return std::string(method) + "  n=" + std::to_string(n) + "  PSNR " + pm_std(pm, ps) + " dB  SSIM " + pm_std(sm, ss);
}

int run_eval(const Eval& o) {
    const fs::path dir(o.data);
    const auto ids = scan_ids(dir, "phantom");
    if (o.train_count >= ids.size()) {
        throw Failure{kUsage, "--train-count " + std::to_string(o.train_count) + " leaves no test scans out of " +
                                  std::to_string(ids.size())};
    }
    const std::vector<int> test(ids.begin() + static_cast<long>(o.train_count), ids.end());
    require_inputs(dir, {"fbp", "dbp"}, test);

    dbp_report* raw = nullptr;
    check(dbp_report_create(&raw));
    ReportPtr report(raw);
    for (int id : test) {
        const auto truth = load_image(dir / scan_file("phantom", id));
        const auto fbp = load_image(dir / scan_file("fbp", id));
        const auto dbp = load_image(dir / scan_file("dbp", id));
        check(dbp_report_add(report.get(), id, "FBP", fbp.get(), truth.get()));
        check(dbp_report_add(report.get(), id, "DBP", dbp.get(), truth.get()));
        if (o.export_pgm) {
            const dbp_image* panels[] = {fbp.get(), dbp.get(), truth.get()};
            check(dbp_export_pgm(panels, 3, (dir / scan_file("compare", id, ".pgm")).string().c_str()));
        }
    }
    const fs::path report_path(o.report);
    if (report_path.has_parent_path()) ensure_dir(report_path.parent_path());
    check(dbp_report_write(report.get(), o.report.c_str()));
    record_config(dir, "eval", {{"train_count", std::to_string(o.train_count)},
                                {"test_scans", std::to_string(test.size())},
                                {"export_pgm", o.export_pgm ? "true" : "false"}});
    std::cout << aggregate_line(report.get(), "FBP") << '\n' << aggregate_line(report.get(), "DBP") << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse-view CT reconstruction: FBP and learned back projection"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    GenData gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Generate Voronoi grain phantoms");
    gen_cmd->add_option("--out", gen.out, "Output directory")->required();
    gen_cmd->add_option("--count", gen.count, "Number of phantoms")->capture_default_str();
    gen_cmd->add_option("--size", gen.size, "Image side length")->capture_default_str()->check(CLI::Range(4, 4096));
    gen_cmd->add_option("--seed", gen.seed, "Base seed; scan k uses seed + k")->capture_default_str();
    gen_cmd->add_option("--grains", gen.grains, "Grain count range LO:HI")->capture_default_str();

    std::string project_data;
    std::size_t views = 16;
    auto* project_cmd = app.add_subcommand("project", "Forward project every phantom");
    project_cmd->add_option("--data", project_data, "Data directory")->required();
    project_cmd->add_option("--views", views, "Uniform views over [0, pi)")->capture_default_str();

    std::string fbp_data;
    auto* fbp_cmd = app.add_subcommand("fbp", "Filtered back projection of every sinogram");
    fbp_cmd->add_option("--data", fbp_data, "Data directory")->required();

    Train train;
    auto* train_cmd = app.add_subcommand("train", "Train the reconstruction network");
    train_cmd->add_option("--data", train.data, "Data directory")->required();
    train_cmd->add_option("--out", train.out, "Checkpoint path (.dbpm)")->required();
    train_cmd->add_option("--preset", train.preset, "Scale preset")
        ->check(CLI::IsMember({"lite", "paper"}))
        ->capture_default_str();
    train_cmd->add_option("--train-count", train.train_count, "Training scans, lowest ids first")->capture_default_str();
    train_cmd->add_option("--epochs", train.epochs, "Override epoch count");
    train_cmd->add_option("--patches-per-scan", train.patches_per_scan, "Override patches drawn per scan");
    train_cmd->add_option("--depth", train.depth, "Override middle block count");
    train_cmd->add_option("--width", train.width, "Override feature width");
    train_cmd->add_option("--batch-size", train.batch_size, "Override mini-batch size");
    train_cmd->add_option("--seed", train.seed, "Override training seed");

    std::string infer_model, infer_data;
    auto* infer_cmd = app.add_subcommand("infer", "Reconstruct every sinogram with a trained network");
    infer_cmd->add_option("--model", infer_model, "Checkpoint path")->required();
    infer_cmd->add_option("--data", infer_data, "Data directory")->required();

    Eval eval;
    auto* eval_cmd = app.add_subcommand("eval", "Score FBP and network reconstructions of the test scans");
    eval_cmd->add_option("--data", eval.data, "Data directory")->required();
    eval_cmd->add_option("--report", eval.report, "Report path (.csv)")->required();
    eval_cmd->add_flag("--export-pgm", eval.export_pgm, "Write FBP | DBP | truth strips as compare_XXXX.pgm");
    eval_cmd->add_option("--train-count", eval.train_count, "Scans excluded as training data")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*gen_cmd) return run_gen_data(gen);
        if (*project_cmd) return run_project(project_data, views);
        if (*fbp_cmd) return run_fbp(fbp_data);
        if (*train_cmd) return run_train(train);
        if (*infer_cmd) return run_infer(infer_model, infer_data);
        if (*eval_cmd) return run_eval(eval);
    } catch (const Failure& f) {
        std::cerr << "dbp: " << f.message << '\n';
        return f.code;
    } catch (const std::exception& e) {
        std::cerr << "dbp: " << e.what() << '\n';
        return kOther;
    }
    return kUsage;
}
