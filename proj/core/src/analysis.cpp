#include "tsadv/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "tsadv/errors.hpp"

namespace tsadv {

DistanceMatrix pairwise_euclidean(const std::vector<std::vector<double>>& vectors) {
    if (vectors.size() < 2) throw DataError("pairwise_euclidean needs at least 2 vectors");
    const size_t dim = vectors.front().size();
    for (const auto& v : vectors)
        if (v.size() != dim) throw DimensionError("pairwise_euclidean: ragged input vectors");
    DistanceMatrix m;
    m.n = static_cast<int>(vectors.size());
    m.d.assign(static_cast<size_t>(m.n) * m.n, 0.0);
    for (int i = 0; i < m.n; ++i)
        for (int j = i + 1; j < m.n; ++j) {
            double s = 0;
            for (size_t k = 0; k < dim; ++k) {
                double diff = vectors[static_cast<size_t>(i)][k] - vectors[static_cast<size_t>(j)][k];
                s += diff * diff;
            }
            m.at(i, j) = m.at(j, i) = std::sqrt(s);
        }
    return m;
}

namespace {

void validate_distances(const DistanceMatrix& dist) {
    if (dist.n < 2) throw DataError("distance matrix must have n >= 2");
    if (dist.d.size() != static_cast<size_t>(dist.n) * dist.n)
        throw DimensionError("distance matrix storage does not match n");
    for (int i = 0; i < dist.n; ++i) {
        if (dist.at(i, i) != 0.0) throw DataError("distance matrix diagonal must be zero");
        for (int j = 0; j < dist.n; ++j) {
            if (dist.at(i, j) < 0) throw DataError("distances must be nonnegative");
            if (std::abs(dist.at(i, j) - dist.at(j, i)) > 1e-12)
                throw DataError("distance matrix must be symmetric");
        }
    }
}

double sum_sq_distances(const DistanceMatrix& dist) {
    double s = 0;
    for (int i = 0; i < dist.n; ++i)
        for (int j = i + 1; j < dist.n; ++j) s += dist.at(i, j) * dist.at(i, j);
    return s;
}

std::vector<std::pair<double, double>> classical_mds_init(const DistanceMatrix& dist,
                                                          uint64_t seed) {
    const int n = dist.n;
    Eigen::MatrixXd B(n, n);
    // double centering of the squared distances
    std::vector<double> row_mean(static_cast<size_t>(n), 0.0);
    double grand = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double d2 = dist.at(i, j) * dist.at(i, j);
            row_mean[static_cast<size_t>(i)] += d2;
            grand += d2;
        }
        row_mean[static_cast<size_t>(i)] /= n;
    }
    grand /= static_cast<double>(n) * n;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            B(i, j) = -0.5 * (dist.at(i, j) * dist.at(i, j) - row_mean[static_cast<size_t>(i)] -
                              row_mean[static_cast<size_t>(j)] + grand);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B);
    std::vector<std::pair<double, double>> pts(static_cast<size_t>(n), {0.0, 0.0});
    // eigenvalues ascending; take the top two if positive
    bool any = false;
    for (int k = 0; k < 2; ++k) {
        int col = n - 1 - k;
        if (col < 0) break;
        double ev = es.eigenvalues()(col);
        if (ev <= 1e-12) continue;
        any = true;
        double scale = std::sqrt(ev);
        for (int i = 0; i < n; ++i) {
            double c = es.eigenvectors()(i, col) * scale;
            if (k == 0)
                pts[static_cast<size_t>(i)].first = c;
            else
                pts[static_cast<size_t>(i)].second = c;
        }
    }
    if (!any) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (auto& p : pts) p = {u(rng), u(rng)};
    }
    return pts;
}

double point_dist(const std::pair<double, double>& a, const std::pair<double, double>& b) {
    double dx = a.first - b.first, dy = a.second - b.second;
    return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

double stress_of(const DistanceMatrix& dist, const std::vector<std::pair<double, double>>& pts) {
    double num = 0, den = 0;
    for (int i = 0; i < dist.n; ++i)
        for (int j = i + 1; j < dist.n; ++j) {
            double delta = point_dist(pts[static_cast<size_t>(i)], pts[static_cast<size_t>(j)]);
            double r = dist.at(i, j) - delta;
            num += r * r;
            den += dist.at(i, j) * dist.at(i, j);
        }
    return std::sqrt(num / den);
}

Embedding2D smacof_mds(const DistanceMatrix& dist, int max_iter, double tol, uint64_t seed) {
    validate_distances(dist);
    if (sum_sq_distances(dist) <= 0.0)
        throw NumericError("smacof_mds: all distances are zero (degenerate input)");
    const int n = dist.n;

    Embedding2D emb;
    emb.points = classical_mds_init(dist, seed);
    double prev = stress_of(dist, emb.points);

    for (int it = 0; it < max_iter; ++it) {
        // Guttman transform: X <- (1/n) B(X) X with unit weights
        std::vector<std::pair<double, double>> next(static_cast<size_t>(n), {0.0, 0.0});
        std::vector<double> bdiag(static_cast<size_t>(n), 0.0);
        for (int i = 0; i < n; ++i) {
            double nx = 0, ny = 0;
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                double delta = point_dist(emb.points[static_cast<size_t>(i)],
                                          emb.points[static_cast<size_t>(j)]);
                double bij = delta > 1e-15 ? -dist.at(i, j) / delta : 0.0;
                bdiag[static_cast<size_t>(i)] -= bij;
                nx += bij * emb.points[static_cast<size_t>(j)].first;
                ny += bij * emb.points[static_cast<size_t>(j)].second;
            }
            nx += bdiag[static_cast<size_t>(i)] * emb.points[static_cast<size_t>(i)].first;
            ny += bdiag[static_cast<size_t>(i)] * emb.points[static_cast<size_t>(i)].second;
            next[static_cast<size_t>(i)] = {nx / n, ny / n};
        }
        emb.points = std::move(next);
        double cur = stress_of(dist, emb.points);
        emb.stress_history.push_back(cur);
        emb.iterations_used = it + 1;
        if (prev > 0 && std::abs(prev - cur) / prev < tol) {
            prev = cur;
            break;
        }
        prev = cur;
    }
    emb.stress = prev;
    return emb;
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<std::pair<double, double>>& pairs) {
    WilcoxonResult res;
    std::vector<double> diffs;
    for (const auto& [a, b] : pairs) {
        double d = b - a;
        if (d != 0.0) diffs.push_back(d);
    }
    res.n_effective = static_cast<int>(diffs.size());
    if (diffs.empty()) {
        res.degenerate = true;
        res.p_value = 1.0;
        return res;
    }
    const int n = res.n_effective;

    // average ranks of |d|, ties shared
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int i, int j) {
        return std::abs(diffs[static_cast<size_t>(i)]) < std::abs(diffs[static_cast<size_t>(j)]);
    });
    std::vector<double> rank(static_cast<size_t>(n), 0.0);
    std::vector<int> tie_sizes;
    for (int i = 0; i < n;) {
        int j = i;
        while (j < n && std::abs(diffs[static_cast<size_t>(order[static_cast<size_t>(j)])]) ==
                            std::abs(diffs[static_cast<size_t>(order[static_cast<size_t>(i)])]))
            ++j;
        double avg = (i + 1 + j) / 2.0;  // mean of ranks i+1 .. j
        for (int k = i; k < j; ++k) rank[static_cast<size_t>(order[static_cast<size_t>(k)])] = avg;
        tie_sizes.push_back(j - i);
        i = j;
    }

    double w_plus = 0;
    for (int i = 0; i < n; ++i)
        if (diffs[static_cast<size_t>(i)] > 0) w_plus += rank[static_cast<size_t>(i)];
    res.statistic = w_plus;

    if (n <= 25) {
        res.method = WilcoxonMethod::Exact;
        // P(W+ >= w) by dynamic programming over doubled ranks (average ranks
        // are half-integers); identical to enumerating all 2^n sign vectors.
        std::vector<int> dr(static_cast<size_t>(n));
        int total = 0;
        for (int i = 0; i < n; ++i) {
            dr[static_cast<size_t>(i)] = static_cast<int>(std::llround(2.0 * rank[static_cast<size_t>(i)]));
            total += dr[static_cast<size_t>(i)];
        }
        std::vector<uint64_t> count(static_cast<size_t>(total) + 1, 0);
        count[0] = 1;
        for (int i = 0; i < n; ++i)
            for (int s = total; s >= dr[static_cast<size_t>(i)]; --s)
                count[static_cast<size_t>(s)] += count[static_cast<size_t>(s - dr[static_cast<size_t>(i)])];
        int w2 = static_cast<int>(std::llround(2.0 * w_plus));
        uint64_t ge = 0;
        for (int s = w2; s <= total; ++s) ge += count[static_cast<size_t>(s)];
        res.p_value = static_cast<double>(ge) / std::pow(2.0, n);
    } else {
        res.method = WilcoxonMethod::NormalApproximation;
        double mu = n * (n + 1) / 4.0;
        double var = n * (n + 1) * (2.0 * n + 1) / 24.0;
        for (int t : tie_sizes) var -= (static_cast<double>(t) * t * t - t) / 48.0;
        double z = (w_plus - mu - 0.5) / std::sqrt(var);
        res.p_value = 0.5 * std::erfc(z / std::sqrt(2.0));
    }
    res.p_value = std::min(1.0, std::max(0.0, res.p_value));
    return res;
}

VariationReport accuracy_variation_report(const std::vector<CampaignSummary>& campaigns) {
    VariationReport rep;
    rep.rows = campaigns;
    std::map<std::string, std::pair<double, int>> agg;
    for (const auto& c : campaigns) {
        agg[c.method].first += c.accuracy_variation;
        agg[c.method].second += 1;
    }
    for (const auto& [method, sum_count] : agg)
        rep.mean_variation_by_method.emplace_back(method, sum_count.first / sum_count.second);
    return rep;
}

std::string VariationReport::to_csv() const {
    std::ostringstream os;
    os << "dataset,method,epsilon,original_accuracy,attacked_accuracy,accuracy_variation\n";
    for (const auto& r : rows)
        os << r.dataset << ',' << r.method << ',' << r.epsilon << ',' << r.original_accuracy
           << ',' << r.attacked_accuracy << ',' << r.accuracy_variation << '\n';
    for (const auto& [method, mean] : mean_variation_by_method)
        os << "mean," << method << ",,,," << mean << '\n';
    return os.str();
}

}  // namespace tsadv
