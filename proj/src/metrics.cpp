#include "dbp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include "dbp/errors.hpp"
#include "dbp/phantom.hpp"

namespace dbp {

namespace {

constexpr int kRadius = 5;  // 11 x 11 window
constexpr double kSigma = 1.5;
constexpr double kC1 = (0.01 * 1.0) * (0.01 * 1.0);
constexpr double kC2 = (0.03 * 1.0) * (0.03 * 1.0);

void check_same_size(const Image& a, const Image& b) {
    if (a.size() != b.size()) {
        throw InvalidInput("image sizes differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
}

double psnr_from(double sum_sq, std::size_t count, double peak) {
    if (count == 0) throw InvalidInput("psnr over an empty pixel set");
    const double mse = sum_sq / static_cast<double>(count);
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw InvalidInput("malformed number in report: '" + s + "'");
    return v;
}

std::pair<double, std::optional<double>> mean_std(const std::vector<double>& values) {
    if (values.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::nullopt};
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    if (values.size() < 2) return {mean, std::nullopt};
    double sq = 0.0;
    for (double v : values) sq += (v - mean) * (v - mean);
    return {mean, std::sqrt(sq / static_cast<double>(values.size() - 1))};
}

}  // namespace

double psnr(const Image& a, const Image& b, double peak) {
    check_same_size(a, b);
    double sum = 0.0;
    const auto x = a.data();
    const auto y = b.data();
    for (std::size_t i = 0; i < x.size(); ++i) sum += (x[i] - y[i]) * (x[i] - y[i]);
    return psnr_from(sum, x.size(), peak);
}

double psnr_in_support(const Image& a, const Image& b, double peak) {
    check_same_size(a, b);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r < a.size(); ++r) {
        for (std::size_t c = 0; c < a.size(); ++c) {
            if (!in_support(a.size(), r, c)) continue;
            const double d = a.at(r, c) - b.at(r, c);
            sum += d * d;
            ++count;
        }
    }
    return psnr_from(sum, count, peak);
}

double ssim(const Image& a, const Image& b) {
    check_same_size(a, b);
    const int n = static_cast<int>(a.size());
    if (n < 2 * kRadius + 1) throw InvalidInput("image is smaller than the 11x11 SSIM window");

    double window[2 * kRadius + 1][2 * kRadius + 1];
    for (int dy = -kRadius; dy <= kRadius; ++dy)
        for (int dx = -kRadius; dx <= kRadius; ++dx)
            window[dy + kRadius][dx + kRadius] = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));

    double total = 0.0;
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            const int y0 = std::max(0, r - kRadius), y1 = std::min(n - 1, r + kRadius);
            const int x0 = std::max(0, c - kRadius), x1 = std::min(n - 1, c + kRadius);

            double wsum = 0.0, mu_a = 0.0, mu_b = 0.0;
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    const double w = window[y - r + kRadius][x - c + kRadius];
                    wsum += w;
                    mu_a += w * a.at(y, x);
                    mu_b += w * b.at(y, x);
                }
            }
            mu_a /= wsum;
            mu_b /= wsum;

            double var_a = 0.0, var_b = 0.0, cov = 0.0;
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    const double w = window[y - r + kRadius][x - c + kRadius];
                    const double da = a.at(y, x) - mu_a;
                    const double db = b.at(y, x) - mu_b;
                    var_a += w * da * da;
                    var_b += w * db * db;
                    cov += w * da * db;
                }
            }
            var_a /= wsum;
            var_b /= wsum;
            cov /= wsum;

            total += ((2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2)) /
                     ((mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2));
        }
    }
    return total / (static_cast<double>(n) * static_cast<double>(n));
}

void MetricsReport::add(MetricsRow row) { rows_.push_back(std::move(row)); }

std::vector<std::string> MetricsReport::methods() const {
    std::vector<std::string> out;
    for (const auto& row : rows_) {
        if (std::find(out.begin(), out.end(), row.method) == out.end()) out.push_back(row.method);
    }
    return out;
}

MetricsAggregate MetricsReport::aggregate(const std::string& method) const {
    std::vector<double> psnrs, ssims;
    for (const auto& row : rows_) {
        if (row.method != method) continue;
        if (std::isfinite(row.psnr_db)) psnrs.push_back(row.psnr_db);
        ssims.push_back(row.ssim);
    }
    if (ssims.empty()) throw InvalidInput("no rows for method '" + method + "'");
    MetricsAggregate agg;
    agg.method = method;
    agg.count = ssims.size();
    agg.psnr_count = psnrs.size();
    std::tie(agg.psnr_mean, agg.psnr_std) = mean_std(psnrs);
    std::tie(agg.ssim_mean, agg.ssim_std) = mean_std(ssims);
    return agg;
}

std::string format_mean_std(double mean, const std::optional<double>& stddev) {
    char buf[64];
    if (std::isnan(mean)) return "n/a ± n/a";
    if (stddev) {
        std::snprintf(buf, sizeof buf, "%.2f ± %.2f", mean, *stddev);
    } else {
        std::snprintf(buf, sizeof buf, "%.2f ± n/a", mean);
    }
    return buf;
}

std::string MetricsReport::to_csv() const {
    std::ostringstream out;
    out << "scan,method,psnr_db,ssim\n";
    for (const auto& row : rows_) {
        out << row.scan_id << ',' << row.method << ',' << format_double(row.psnr_db) << ','
            << format_double(row.ssim) << '\n';
    }
    for (const auto& method : methods()) {
        const MetricsAggregate agg = aggregate(method);
        out << "# aggregate," << method << ",n=" << agg.count << ",psnr_db=" << format_mean_std(agg.psnr_mean, agg.psnr_std)
            << ",ssim=" << format_mean_std(agg.ssim_mean, agg.ssim_std) << '\n';
    }
    return out.str();
}

MetricsReport MetricsReport::from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "scan,method,psnr_db,ssim") {
        throw InvalidInput("report header must be 'scan,method,psnr_db,ssim'");
    }
    MetricsReport report;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::istringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, ',')) fields.push_back(cell);
        if (fields.size() != 4) throw InvalidInput("report row must have 4 fields: '" + line + "'");
        report.add({std::stoi(fields[0]), fields[1], parse_double(fields[2]), parse_double(fields[3])});
    }
    return report;
}

void evaluate(std::span<const ScanImage> predictions, std::span<const ScanImage> ground_truth,
              const std::string& method, MetricsReport& report) {
    std::map<int, const Image*> truth;
    for (const auto& gt : ground_truth) truth[gt.scan_id] = &gt.image;
    if (truth.size() != ground_truth.size()) throw InvalidInput("duplicate scan id in ground truth");
    if (predictions.size() != ground_truth.size()) {
        throw InvalidInput("prediction and ground-truth sets differ in size");
    }
    for (const auto& pred : predictions) {
        const auto it = truth.find(pred.scan_id);
        if (it == truth.end()) {
            throw InvalidInput("scan " + std::to_string(pred.scan_id) + " has no ground truth");
        }
        report.add({pred.scan_id, method, psnr(pred.image, *it->second), ssim(pred.image, *it->second)});
    }
}

}  // namespace dbp
