#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dbp/image.hpp"

namespace dbp {

/// 10 log10(peak^2 / mse). Identical images give +infinity, which aggregation skips.
double psnr(const Image& a, const Image& b, double peak = 1.0);

/// PSNR restricted to the phantom support disc (see in_support).
double psnr_in_support(const Image& a, const Image& b, double peak = 1.0);

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
/// L = 1. Near the border the window is truncated and its weights renormalized;
/// the index is the mean of the SSIM map over every pixel.
double ssim(const Image& a, const Image& b);

struct ScanImage {
    int scan_id = 0;
    Image image;
};

struct MetricsRow {
    int scan_id = 0;
    std::string method;
    double psnr_db = 0.0;
    double ssim = 0.0;
};

struct MetricsAggregate {
    std::string method;
    std::size_t count = 0;        // rows for this method
    std::size_t psnr_count = 0;   // rows with finite PSNR
    double psnr_mean = 0.0;
    std::optional<double> psnr_std;  // sample std, absent with fewer than 2 values
    double ssim_mean = 0.0;
    std::optional<double> ssim_std;
};

class MetricsReport {
public:
    void add(MetricsRow row);
    const std::vector<MetricsRow>& rows() const noexcept { return rows_; }

    /// Methods in order of first appearance.
    std::vector<std::string> methods() const;
    MetricsAggregate aggregate(const std::string& method) const;

    /// Header `scan,method,psnr_db,ssim`, one row per (scan, method), then one
    /// `# aggregate` comment line per method with `mean ± std` to two decimals.
    std::string to_csv() const;
    static MetricsReport from_csv(const std::string& text);

private:
    std::vector<MetricsRow> rows_;
};

/// Scores `predictions` against `ground_truth` matched by scan id, appending one
/// row per scan to `report` under `method`.
void evaluate(std::span<const ScanImage> predictions, std::span<const ScanImage> ground_truth,
              const std::string& method, MetricsReport& report);

/// "12.34 ± 5.67", or "12.34 ± n/a" without a standard deviation.
std::string format_mean_std(double mean, const std::optional<double>& stddev);

}  // namespace dbp
