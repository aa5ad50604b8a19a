#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tsadv {

// Symmetric nonnegative distances with zero diagonal.
struct DistanceMatrix {
    int n = 0;
    std::vector<double> d;  // row-major n*n

    double at(int i, int j) const { return d[static_cast<size_t>(i) * n + j]; }
    double& at(int i, int j) { return d[static_cast<size_t>(i) * n + j]; }
};

DistanceMatrix pairwise_euclidean(const std::vector<std::vector<double>>& vectors);

struct Embedding2D {
    std::vector<std::pair<double, double>> points;
    double stress = 0;
    int iterations_used = 0;
    std::vector<double> stress_history;  // one entry per Guttman iteration
};

// Stress-minimizing 2-D embedding: classical (eigendecomposition) MDS
// initialization followed by Guttman-transform iterations until the relative
// stress change drops below tol or max_iter is hit. Stress is the normalized
// residual sum of squares over pairs i<j, square-rooted.
Embedding2D smacof_mds(const DistanceMatrix& dist, int max_iter = 300, double tol = 1e-6,
                       uint64_t seed = 0);

double stress_of(const DistanceMatrix& dist, const std::vector<std::pair<double, double>>& pts);

enum class WilcoxonMethod { Exact, NormalApproximation };

struct WilcoxonResult {
    double statistic = 0;  // W+ = sum of ranks of positive differences (b - a)
    double p_value = 1;
    int n_effective = 0;  // zero differences dropped
    WilcoxonMethod method = WilcoxonMethod::Exact;
    bool degenerate = false;  // all differences zero
};

// Paired one-sided signed-rank test, alternative: b exceeds a (here, method b
// reduces accuracy more). Ties share average ranks; exact null enumeration
// for n_effective <= 25, else normal approximation with continuity and tie
// corrections.
WilcoxonResult wilcoxon_signed_rank(const std::vector<std::pair<double, double>>& pairs);

struct CampaignSummary {
    std::string dataset;
    std::string method;
    double epsilon = 0;
    double original_accuracy = 0;
    double attacked_accuracy = 0;
    double accuracy_variation = 0;
};

struct VariationReport {
    std::vector<CampaignSummary> rows;
    std::vector<std::pair<std::string, double>> mean_variation_by_method;
    std::string to_csv() const;
};

VariationReport accuracy_variation_report(const std::vector<CampaignSummary>& campaigns);

}  // namespace tsadv
