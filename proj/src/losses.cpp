#include "splatgrasp/losses.hpp"

#include "splatgrasp/errors.hpp"
#include "splatgrasp/kdtree.hpp"
#include "splatgrasp/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace splatgrasp {

namespace {

double meanNearestSquared(const PointCloud &from, const PointCloud &to) {
    const KdTree tree(to.points());
    std::vector<double> d(from.size());
    parallel_for(from.size(), [&](std::size_t i) { d[i] = tree.nearest(from[i]).distance2; });
    return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(from.size());
}

double coveredFraction(const PointCloud &from, const PointCloud &to, double threshold) {
    const KdTree tree(to.points());
    const double t2 = threshold * threshold;
    std::vector<unsigned char> hit(from.size());
    parallel_for(from.size(), [&](std::size_t i) { hit[i] = tree.nearest(from[i]).distance2 <= t2; });
    return static_cast<double>(std::count(hit.begin(), hit.end(), 1)) / static_cast<double>(from.size());
}

void checkSameSize(const Image &a, const Image &b) {
    if (a.width() != b.width() || a.height() != b.height())
        throw std::invalid_argument("image dimensions differ");
}

std::vector<double> gaussianKernel(int size, double sigma) {
    std::vector<double> k(static_cast<std::size_t>(size));
    const double c = 0.5 * (size - 1);
    for (int i = 0; i < size; ++i) k[static_cast<std::size_t>(i)] = std::exp(-((i - c) * (i - c)) / (2.0 * sigma * sigma));
    const double s = std::accumulate(k.begin(), k.end(), 0.0);
    for (double &v : k) v /= s;
    return k;
}

// Valid-region separable filtering of a row-major plane.
std::vector<double> filterValid(const std::vector<double> &src, int w, int h, const std::vector<double> &k) {
    const int n = static_cast<int>(k.size());
    const int ow = w - n + 1, oh = h - n + 1;
    std::vector<double> tmp(static_cast<std::size_t>(h * ow));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += k[static_cast<std::size_t>(i)] * src[static_cast<std::size_t>(y * w + x + i)];
            tmp[static_cast<std::size_t>(y * ow + x)] = s;
        }
    std::vector<double> out(static_cast<std::size_t>(oh * ow));
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += k[static_cast<std::size_t>(i)] * tmp[static_cast<std::size_t>((y + i) * ow + x)];
            out[static_cast<std::size_t>(y * ow + x)] = s;
        }
    return out;
}

} // namespace

double chamfer_distance(const PointCloud &a, const PointCloud &b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("chamfer_distance needs nonempty clouds");
    return meanNearestSquared(a, b) + meanNearestSquared(b, a);
}

std::vector<std::size_t> min_cost_assignment(const Eigen::MatrixXd &cost) {
    const auto n = static_cast<std::size_t>(cost.rows());
    if (cost.rows() != cost.cols()) throw std::invalid_argument("assignment needs a square cost matrix");
    if (n == 0) return {};
    const double inf = std::numeric_limits<double>::infinity();
    // 1-based potentials; column 0 is a virtual start.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
    for (std::size_t row = 1; row <= n; ++row) {
        match[0] = row;
        std::size_t col0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[col0] = 1;
            const std::size_t r0 = match[col0];
            double delta = inf;
            std::size_t col1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(static_cast<Eigen::Index>(r0 - 1), static_cast<Eigen::Index>(j - 1)) - u[r0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = col0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    col1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            col0 = col1;
        } while (match[col0] != 0);
        do {
            const std::size_t col1 = way[col0];
            match[col0] = match[col1];
            col0 = col1;
        } while (col0 != 0);
    }
    std::vector<std::size_t> assignment(n);
    for (std::size_t j = 1; j <= n; ++j) assignment[match[j] - 1] = j - 1;
    return assignment;
}

EmdResult auction_emd(std::span<const Point3> a, std::span<const Point3> b, double targetGap) {
    const std::size_t n = a.size();
    if (b.size() != n) throw std::invalid_argument("auction_emd needs equal sizes");
    EmdResult res;
    res.exact = false;
    if (n == 0) return res;

    auto cost = [&](std::size_t i, std::size_t j) { return (a[i] - b[j]).norm(); };
    // Triangle inequality through a_0 and b_0 bounds every cost.
    double maxA = 0.0, maxB = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        maxA = std::max(maxA, cost(i, 0));
        maxB = std::max(maxB, cost(0, i));
    }
    const double maxCost = maxA + cost(0, 0) + maxB;

    constexpr std::size_t kNone = static_cast<std::size_t>(-1);
    std::vector<double> price(n, 0.0);
    std::vector<std::size_t> owner(n, kNone), assigned(n, kNone);
    double eps = std::max(maxCost / 4.0, 1e-12);

    for (;;) {
        std::fill(owner.begin(), owner.end(), kNone);
        std::fill(assigned.begin(), assigned.end(), kNone);
        std::deque<std::size_t> queue(n);
        std::iota(queue.begin(), queue.end(), std::size_t{0});
        // Gauss-Seidel bidding: one unassigned bidder at a time, FIFO.
        while (!queue.empty()) {
            const std::size_t i = queue.front();
            queue.pop_front();
            double best = -std::numeric_limits<double>::infinity(), second = best;
            std::size_t bestJ = 0;
            for (std::size_t j = 0; j < n; ++j) {
                const double value = -cost(i, j) - price[j];
                if (value > best) {
                    second = best;
                    best = value;
                    bestJ = j;
                } else if (value > second) {
                    second = value;
                }
            }
            const double increment = (n == 1 ? 0.0 : best - second) + eps;
            price[bestJ] += increment;
            if (owner[bestJ] != kNone) {
                assigned[owner[bestJ]] = kNone;
                queue.push_back(owner[bestJ]);
            }
            owner[bestJ] = i;
            assigned[i] = bestJ;
        }

        double primal = 0.0;
        for (std::size_t i = 0; i < n; ++i) primal += cost(i, assigned[i]);
        // Dual bound: u_i = min_j (c_ij + p_j), v_j = -p_j is feasible.
        std::vector<double> rowMin(n);
        parallel_for(n, [&](std::size_t i) {
            double m = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < n; ++j) m = std::min(m, cost(i, j) + price[j]);
            rowMin[i] = m;
        });
        const double dual = std::accumulate(rowMin.begin(), rowMin.end(), 0.0) -
                            std::accumulate(price.begin(), price.end(), 0.0);
        const double gap = primal > 0.0 ? std::max(0.0, (primal - dual) / primal) : 0.0;

        res.distance = primal / static_cast<double>(n);
        res.lower_bound = std::min(res.distance, dual / static_cast<double>(n));
        res.gap = gap;
        res.assignment = assigned;
        if (gap <= targetGap || eps < 1e-12 * std::max(maxCost, 1.0)) break;
        eps /= 5.0;
    }
    return res;
}

EmdResult earth_mover(const PointCloud &a, const PointCloud &b, const EmdOptions &options) {
    if (a.empty() || b.empty()) throw std::invalid_argument("earth_mover needs nonempty clouds");
    if (a.size() != b.size())
        throw std::invalid_argument("earth_mover needs equal point counts; resample_cloud the inputs first");
    if (options.max_points > 0 && a.size() > options.max_points) {
        EmdOptions inner = options;
        inner.max_points = 0;
        return earth_mover(resample_cloud(a, options.max_points, 0), resample_cloud(b, options.max_points, 0), inner);
    }
    const std::size_t n = a.size();
    if (n > options.exact_limit) {
        EmdResult res = auction_emd(a.points(), b.points(), options.target_gap);
        res.points = n;
        return res;
    }

    Eigen::MatrixXd cost(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (a[i] - b[j]).norm();
    EmdResult res;
    res.assignment = min_cost_assignment(cost);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        total += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(res.assignment[i]));
    res.distance = total / static_cast<double>(n);
    res.lower_bound = res.distance;
    res.points = n;
    return res;
}

double earth_mover_distance(const PointCloud &a, const PointCloud &b) { return earth_mover(a, b).distance; }

FScore f_score_parts(const PointCloud &a, const PointCloud &b, double threshold) {
    if (a.empty() || b.empty()) throw std::invalid_argument("f_score needs nonempty clouds");
    if (!(threshold > 0.0)) throw std::invalid_argument("f_score threshold must be positive");
    FScore f;
    f.precision = coveredFraction(a, b, threshold);
    f.recall = coveredFraction(b, a, threshold);
    const double s = f.precision + f.recall;
    f.fscore = s > 0.0 ? 2.0 * f.precision * f.recall / s : 0.0;
    return f;
}

double f_score(const PointCloud &a, const PointCloud &b, double threshold) {
    return f_score_parts(a, b, threshold).fscore;
}

double mse(const Image &a, const Image &b) {
    checkSameSize(a, b);
    double sum = 0.0;
    for (std::size_t i = 0; i < a.pixel_count(); ++i) sum += (a.pixels()[i] - b.pixels()[i]).squaredNorm();
    return sum / (3.0 * static_cast<double>(a.pixel_count()));
}

double ssim(const Image &a, const Image &b, const SsimOptions &options) {
    checkSameSize(a, b);
    const int w = a.width(), h = a.height(), n = options.window;
    if (w < n || h < n) throw std::invalid_argument("images are smaller than the SSIM window");
    const double c1 = std::pow(0.01 * options.dynamic_range, 2), c2 = std::pow(0.03 * options.dynamic_range, 2);
    const auto kernel = gaussianKernel(n, options.sigma);

    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
        const auto pa = a.channel(c), pb = b.channel(c);
        std::vector<double> aa(pa.size()), bb(pa.size()), ab(pa.size());
        for (std::size_t i = 0; i < pa.size(); ++i) {
            aa[i] = pa[i] * pa[i];
            bb[i] = pb[i] * pb[i];
            ab[i] = pa[i] * pb[i];
        }
        const auto mu1 = filterValid(pa, w, h, kernel), mu2 = filterValid(pb, w, h, kernel);
        const auto e11 = filterValid(aa, w, h, kernel), e22 = filterValid(bb, w, h, kernel),
                   e12 = filterValid(ab, w, h, kernel);
        double sum = 0.0;
        for (std::size_t i = 0; i < mu1.size(); ++i) {
            const double s11 = e11[i] - mu1[i] * mu1[i];
            const double s22 = e22[i] - mu2[i] * mu2[i];
            const double s12 = e12[i] - mu1[i] * mu2[i];
            sum += ((2.0 * mu1[i] * mu2[i] + c1) * (2.0 * s12 + c2)) /
                   ((mu1[i] * mu1[i] + mu2[i] * mu2[i] + c1) * (s11 + s22 + c2));
        }
        total += sum / static_cast<double>(mu1.size());
    }
    return total / 3.0;
}

void LossConfig::validate() const {
    for (double v : {lambda_cd, lambda_emd, lambda_ssim, lambda_lpips})
        if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("loss weights must be finite and nonnegative");
    if (!(fscore_threshold > 0.0)) throw std::invalid_argument("F-score threshold must be positive");
}

MetricReport composite_loss(const LossConfig &config, const PointCloud &pred, const PointCloud &gt,
                            std::span<const Image> rendered, std::span<const Image> gtViews) {
    config.validate();
    if (rendered.size() != gtViews.size())
        throw std::invalid_argument("rendered and ground-truth view lists differ in length");

    MetricReport r;
    r.lambda_cd = config.lambda_cd;
    r.lambda_emd = config.lambda_emd;
    r.lambda_ssim = config.lambda_ssim;
    r.lambda_lpips = config.lambda_lpips;
    r.fscore_threshold = config.fscore_threshold;

    r.cd = chamfer_distance(pred, gt);
    const EmdResult emd = earth_mover(pred, gt, config.emd);
    r.emd = emd.distance;
    r.emd_lower_bound = emd.lower_bound;
    r.emd_gap = emd.gap;
    r.emd_exact = emd.exact;
    r.emd_points = emd.points;
    r.fscore = f_score_parts(pred, gt, config.fscore_threshold);
    r.geometry_loss = config.lambda_cd * r.cd + config.lambda_emd * r.emd;

    r.lpips_enabled = static_cast<bool>(config.lpips_hook);
    if (!rendered.empty()) {
        double sumLoss = 0.0, sumMse = 0.0, sumSsim = 0.0;
        for (std::size_t i = 0; i < rendered.size(); ++i) {
            ViewMetrics v;
            v.mse = mse(rendered[i], gtViews[i]);
            v.ssim = ssim(rendered[i], gtViews[i]);
            v.lpips = config.lpips_hook ? config.lpips_hook(rendered[i], gtViews[i]) : 0.0;
            v.loss = v.mse + config.lambda_ssim * (1.0 - v.ssim) + config.lambda_lpips * v.lpips;
            sumLoss += v.loss;
            sumMse += v.mse;
            sumSsim += v.ssim;
            r.views.push_back(v);
        }
        const double n = static_cast<double>(rendered.size());
        r.render_loss = sumLoss / n;
        r.mse = sumMse / n;
        r.ssim = sumSsim / n;
    }
    r.total = r.geometry_loss + r.render_loss;
    return r;
}

} // namespace splatgrasp
