#pragma once

#include "splatgrasp/geometry.hpp"
#include "splatgrasp/renderer.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace splatgrasp {

/// Mean squared nearest-neighbor distance from a to b plus from b to a.
double chamfer_distance(const PointCloud &a, const PointCloud &b);

/// Optimal assignment for a square cost matrix (shortest augmenting path
/// with potentials). Returns column index per row.
std::vector<std::size_t> min_cost_assignment(const Eigen::MatrixXd &cost);

struct EmdOptions {
    std::size_t exact_limit = 512; // above this size use the auction solver
    double target_gap = 0.01;      // certified relative gap for the auction
    std::size_t max_points = 0;    // nonzero: farthest-point subsample both clouds to this size first
};

struct EmdResult {
    double distance = 0.0;    // mean matched Euclidean distance
    double lower_bound = 0.0; // dual bound on the optimum (equals distance when exact)
    double gap = 0.0;         // (distance - lower_bound) / distance, 0 when exact
    bool exact = true;
    std::size_t points = 0;              // cloud size actually matched
    std::vector<std::size_t> assignment; // b index per a index (of the matched clouds)
};

/// Earth mover's distance between equal-size clouds. Throws
/// std::invalid_argument for unequal sizes (resample_cloud first).
EmdResult earth_mover(const PointCloud &a, const PointCloud &b, const EmdOptions &options = {});
double earth_mover_distance(const PointCloud &a, const PointCloud &b);

/// Epsilon-scaling auction on Euclidean costs; stops once the primal/dual
/// gap certificate is within `targetGap`.
EmdResult auction_emd(std::span<const Point3> a, std::span<const Point3> b, double targetGap);

struct FScore {
    double precision = 0.0;
    double recall = 0.0;
    double fscore = 0.0;
};

/// Precision: fraction of a within `threshold` (inclusive) of b; recall the
/// reverse; harmonic mean, 0 when both vanish.
FScore f_score_parts(const PointCloud &a, const PointCloud &b, double threshold);
double f_score(const PointCloud &a, const PointCloud &b, double threshold);

/// Mean over pixels and RGB channels of the squared difference.
double mse(const Image &a, const Image &b);

struct SsimOptions {
    int window = 11;
    double sigma = 1.5;
    double dynamic_range = 1.0;
};

/// Mean SSIM over all valid window positions, averaged over RGB.
double ssim(const Image &a, const Image &b, const SsimOptions &options = {});

/// External perceptual distance (e.g. LPIPS). Absent means a zero term.
using ImageDistance = std::function<double(const Image &, const Image &)>;

struct LossConfig {
    double lambda_cd = 10.0;
    double lambda_emd = 10.0;
    double lambda_ssim = 1.0;
    double lambda_lpips = 2.0;
    double fscore_threshold = 0.02;
    ImageDistance lpips_hook;
    EmdOptions emd;

    void validate() const;
};

struct ViewMetrics {
    double mse = 0.0;
    double ssim = 1.0;
    double lpips = 0.0;
    double loss = 0.0; // mse + lambda_ssim * (1 - ssim) + lambda_lpips * lpips
};

struct MetricReport {
    double cd = 0.0;
    double emd = 0.0;
    double emd_lower_bound = 0.0;
    double emd_gap = 0.0;
    bool emd_exact = true;
    std::size_t emd_points = 0;
    FScore fscore;
    std::optional<double> mse;  // mean over views
    std::optional<double> ssim; // mean over views
    bool lpips_enabled = false;
    std::vector<ViewMetrics> views;
    double geometry_loss = 0.0;
    double render_loss = 0.0;
    double total = 0.0;
    double lambda_cd = 0.0, lambda_emd = 0.0, lambda_ssim = 0.0, lambda_lpips = 0.0, fscore_threshold = 0.0;
};

/// Geometry term lambda_cd * CD + lambda_emd * EMD plus the mean per-view
/// render term, with (1 - SSIM) as the structural loss. Empty view lists give
/// a geometry-only report.
MetricReport composite_loss(const LossConfig &config, const PointCloud &pred, const PointCloud &gt,
                            std::span<const Image> rendered, std::span<const Image> gtViews);

} // namespace splatgrasp
