#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "waydcm/features.hpp"

namespace waydcm {

// Model variants, ordered by how much of the goal machinery they use.
//  - LSTM:    plain encoder/decoder, no goal utilities at all
//  - TrajDCM: dir/occ/coll utilities
//  - WayDCM1: adds the waypoint angle
//  - WayDCM2: adds the waypoint angle and distance
enum class Variant { LSTM, TrajDCM, WayDCM1, WayDCM2 };

Variant variant_from_string(const std::string& name);
std::string to_string(Variant v);

// Which feature columns (dir, occ, coll, dangle, ddist) the variant's utility
// term uses. LSTM uses none.
std::array<bool, FeatureRow::kCount> variant_features(Variant v);

// Coefficients on the standardized feature columns, same order as FeatureRow.
struct BetaVector {
  double dir = 0.0;
  double occ = 0.0;
  double coll = 0.0;
  double dangle = 0.0;
  double ddist = 0.0;

  static constexpr std::size_t kCount = FeatureRow::kCount;
  double operator[](std::size_t i) const {
    const std::array<const double*, kCount> p{&dir, &occ, &coll, &dangle, &ddist};
    return *p[i];
  }
  double& operator[](std::size_t i) {
    const std::array<double*, kCount> p{&dir, &occ, &coll, &dangle, &ddist};
    return *p[i];
  }
  std::array<double, kCount> as_array() const { return {dir, occ, coll, dangle, ddist}; }
};

// u = beta . z for one alternative's standardized features.
double utility(const std::array<double, FeatureRow::kCount>& z, const BetaVector& beta);

struct GoalDistribution {
  std::vector<double> utilities;  // u_k
  std::vector<double> scores;     // s_k = u_k + z_k
  std::vector<double> probs;      // softmax(s)
};

// Numerically safe softmax over s_k = u_k + z_k; pass zeros for z to get the
// pure MNL distribution. Throws NumericError on non-finite inputs.
GoalDistribution goal_probabilities(const std::vector<double>& utilities,
                                    const std::vector<double>& neural_scores);
GoalDistribution goal_probabilities(const std::vector<double>& utilities);

// Standardized feature tables plus chosen alternative per scene.
struct LabeledChoiceData {
  std::vector<std::vector<std::array<double, FeatureRow::kCount>>> features;
  std::vector<std::size_t> labels;

  std::size_t size() const { return labels.size(); }
};

struct FitOptions {
  std::size_t max_iters = 50000;
  double grad_tol = 1e-6;  // infinity norm of the mean-NLL gradient
  double l2 = 0.0;         // optional ridge penalty
  bool parallel = true;    // per-scene terms in parallel, fixed-order reduce
};

struct FitReport {
  Variant variant = Variant::WayDCM2;
  BetaVector beta;
  double nll = 0.0;  // mean cross-entropy at the returned iterate
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> nll_trajectory;  // one entry per iteration
};

// Mean NLL and its gradient over the masked coefficients. Per-scene terms are
// computed into slots and folded in scene order, so the serial and parallel
// paths produce bit-identical sums.
double mnl_nll_grad_serial(const LabeledChoiceData& data, const BetaVector& beta,
                           const std::array<bool, FeatureRow::kCount>& mask,
                           BetaVector* grad);
double mnl_nll_grad_parallel(const LabeledChoiceData& data, const BetaVector& beta,
                             const std::array<bool, FeatureRow::kCount>& mask,
                             BetaVector* grad);

// Full-batch gradient descent with backtracking line search from beta = 0.
// Coefficients outside the variant's feature set stay exactly zero.
FitReport fit_mnl(const LabeledChoiceData& data, Variant variant,
                  const FitOptions& opts = {});

void write_fit_report_json(const std::string& path, const FitReport& report,
                           const std::string& stamp = {});

// One fitted model's row in the coefficient comparison.
struct InterpretabilityRow {
  std::string name;
  Variant variant = Variant::WayDCM2;
  BetaVector beta;
  std::vector<std::string> ranked_features;  // active features by |beta|, desc
  std::vector<std::string> sign_violations;  // active features with beta >= 0
};

InterpretabilityRow interpret_fit(const std::string& name, Variant variant,
                                  const BetaVector& beta);

// CSV with one row per model; columns dir, coll, occ, dangle, ddist in the
// published comparison layout, inactive cells dashed.
void write_beta_table_csv(const std::string& path,
                          const std::vector<InterpretabilityRow>& rows,
                          const std::string& stamp = {});

}  // namespace waydcm
