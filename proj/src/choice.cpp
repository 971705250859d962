#include "waydcm/choice.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "waydcm/errors.hpp"
#include "waydcm/parallel.hpp"

namespace waydcm {

using nlohmann::json;

Variant variant_from_string(const std::string& name) {
  if (name == "lstm") return Variant::LSTM;
  if (name == "trajdcm") return Variant::TrajDCM;
  if (name == "waydcm1") return Variant::WayDCM1;
  if (name == "waydcm2") return Variant::WayDCM2;
  throw ConfigError("unknown variant '" + name +
                    "' (expected lstm, trajdcm, waydcm1 or waydcm2)");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::LSTM: return "lstm";
    case Variant::TrajDCM: return "trajdcm";
    case Variant::WayDCM1: return "waydcm1";
    case Variant::WayDCM2: return "waydcm2";
  }
  throw ConfigError("invalid variant value");
}

std::array<bool, FeatureRow::kCount> variant_features(Variant v) {
  switch (v) {
    case Variant::LSTM: return {false, false, false, false, false};
    case Variant::TrajDCM: return {true, true, true, false, false};
    case Variant::WayDCM1: return {true, true, true, true, false};
    case Variant::WayDCM2: return {true, true, true, true, true};
  }
  throw ConfigError("invalid variant value");
}

double utility(const std::array<double, FeatureRow::kCount>& z, const BetaVector& beta) {
  double u = 0.0;
  for (std::size_t j = 0; j < FeatureRow::kCount; ++j) u += beta[j] * z[j];
  return u;
}

GoalDistribution goal_probabilities(const std::vector<double>& utilities,
                                    const std::vector<double>& neural_scores) {
  if (utilities.size() != neural_scores.size())
    throw ConfigError("utility and score vectors differ in length");
  if (utilities.empty()) throw ConfigError("cannot form a distribution over zero goals");

  GoalDistribution dist;
  dist.utilities = utilities;
  dist.scores.resize(utilities.size());
  for (std::size_t k = 0; k < utilities.size(); ++k) {
    dist.scores[k] = utilities[k] + neural_scores[k];
    if (!std::isfinite(dist.scores[k]))
      throw NumericError("non-finite goal score at alternative " + std::to_string(k));
  }
  const double top = *std::max_element(dist.scores.begin(), dist.scores.end());
  dist.probs.resize(dist.scores.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < dist.scores.size(); ++k) {
    dist.probs[k] = std::exp(dist.scores[k] - top);
    sum += dist.probs[k];
  }
  for (double& p : dist.probs) p /= sum;
  return dist;
}

GoalDistribution goal_probabilities(const std::vector<double>& utilities) {
  return goal_probabilities(utilities, std::vector<double>(utilities.size(), 0.0));
}

namespace {

struct SceneTerm {
  double nll = 0.0;
  std::array<double, FeatureRow::kCount> grad{};
};

SceneTerm scene_nll_grad(const std::vector<std::array<double, FeatureRow::kCount>>& feats,
                         std::size_t label, const BetaVector& beta) {
  std::vector<double> u(feats.size());
  for (std::size_t k = 0; k < feats.size(); ++k) u[k] = utility(feats[k], beta);
  const GoalDistribution dist = goal_probabilities(u);

  SceneTerm term;
  term.nll = -std::log(std::max(dist.probs[label], 1e-300));
  for (std::size_t k = 0; k < feats.size(); ++k) {
    const double w = dist.probs[k] - (k == label ? 1.0 : 0.0);
    for (std::size_t j = 0; j < FeatureRow::kCount; ++j)
      term.grad[j] += w * feats[k][j];
  }
  return term;
}

// Slots folded in scene order, shared by the serial and parallel paths so
// both produce the same bits.
double fold_terms(const std::vector<SceneTerm>& terms,
                  const std::array<bool, FeatureRow::kCount>& mask, BetaVector* grad) {
  const double n = static_cast<double>(terms.size());
  double nll = 0.0;
  std::array<double, FeatureRow::kCount> g{};
  for (const auto& t : terms) {
    nll += t.nll;
    for (std::size_t j = 0; j < FeatureRow::kCount; ++j) g[j] += t.grad[j];
  }
  if (grad) {
    for (std::size_t j = 0; j < FeatureRow::kCount; ++j)
      (*grad)[j] = mask[j] ? g[j] / n : 0.0;
  }
  return nll / n;
}

void check_data(const LabeledChoiceData& data) {
  if (data.features.size() != data.labels.size())
    throw DataError("choice data: feature tables and labels differ in count");
  if (data.labels.empty()) throw DataError("choice data: no scenes");
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    if (data.labels[i] >= data.features[i].size())
      throw DataError("choice data: label out of range in scene " + std::to_string(i));
  }
}

}  // namespace

double mnl_nll_grad_serial(const LabeledChoiceData& data, const BetaVector& beta,
                           const std::array<bool, FeatureRow::kCount>& mask,
                           BetaVector* grad) {
  check_data(data);
  std::vector<SceneTerm> terms(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    terms[i] = scene_nll_grad(data.features[i], data.labels[i], beta);
  return fold_terms(terms, mask, grad);
}

double mnl_nll_grad_parallel(const LabeledChoiceData& data, const BetaVector& beta,
                             const std::array<bool, FeatureRow::kCount>& mask,
                             BetaVector* grad) {
  check_data(data);
  std::vector<SceneTerm> terms(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    terms[i] = scene_nll_grad(data.features[i], data.labels[i], beta);
  });
  return fold_terms(terms, mask, grad);
}

FitReport fit_mnl(const LabeledChoiceData& data, Variant variant, const FitOptions& opts) {
  if (variant == Variant::LSTM)
    throw ConfigError("the lstm variant has no utility coefficients to fit");
  const auto mask = variant_features(variant);
  auto objective = [&](const BetaVector& b, BetaVector* g) {
    double f = opts.parallel ? mnl_nll_grad_parallel(data, b, mask, g)
                             : mnl_nll_grad_serial(data, b, mask, g);
    if (opts.l2 > 0.0) {
      for (std::size_t j = 0; j < BetaVector::kCount; ++j) {
        if (!mask[j]) continue;
        f += 0.5 * opts.l2 * b[j] * b[j];
        if (g) (*g)[j] += opts.l2 * b[j];
      }
    }
    return f;
  };

  FitReport report;
  report.variant = variant;
  BetaVector beta;  // zero start: the objective is convex, so init is cosmetic
  BetaVector grad;
  double f = objective(beta, &grad);
  double step = 1.0;
  const double armijo = 1e-4;

  for (std::size_t it = 0; it < opts.max_iters; ++it) {
    report.nll_trajectory.push_back(f);
    double gsq = 0.0, ginf = 0.0;
    for (std::size_t j = 0; j < BetaVector::kCount; ++j) {
      gsq += grad[j] * grad[j];
      ginf = std::max(ginf, std::abs(grad[j]));
    }
    if (ginf < opts.grad_tol) {
      report.converged = true;
      report.iterations = it;
      break;
    }
    // Backtracking line search, warm-started from twice the last accepted step.
    step *= 2.0;
    BetaVector trial;
    double f_trial = f;
    while (true) {
      for (std::size_t j = 0; j < BetaVector::kCount; ++j)
        trial[j] = beta[j] - step * grad[j];
      f_trial = objective(trial, nullptr);
      if (f_trial <= f - armijo * step * gsq) break;
      step *= 0.5;
      if (step < 1e-18)
        throw NumericError("line search failed to find descent in the coefficient fit");
    }
    beta = trial;
    f = objective(beta, &grad);
    report.iterations = it + 1;
  }

  report.beta = beta;
  report.nll = f;
  return report;
}

void write_fit_report_json(const std::string& path, const FitReport& report,
                           const std::string& stamp) {
  json j;
  if (!stamp.empty()) j["stamp"] = stamp;
  j["variant"] = to_string(report.variant);
  json b;
  const auto& names = FeatureRow::names();
  const auto mask = variant_features(report.variant);
  for (std::size_t j2 = 0; j2 < BetaVector::kCount; ++j2) {
    if (mask[j2]) b["beta_" + names[j2]] = report.beta[j2];
  }
  j["beta"] = std::move(b);
  j["nll"] = report.nll;
  j["iterations"] = report.iterations;
  j["converged"] = report.converged;
  j["nll_trajectory"] = report.nll_trajectory;
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
}

InterpretabilityRow interpret_fit(const std::string& name, Variant variant,
                                  const BetaVector& beta) {
  InterpretabilityRow row;
  row.name = name;
  row.variant = variant;
  row.beta = beta;
  const auto mask = variant_features(variant);
  const auto& names = FeatureRow::names();
  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < BetaVector::kCount; ++j) {
    if (!mask[j]) continue;
    active.push_back(j);
    if (beta[j] >= 0.0) row.sign_violations.push_back(names[j]);
  }
  std::stable_sort(active.begin(), active.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(beta[a]) > std::abs(beta[b]);
  });
  for (std::size_t j : active) row.ranked_features.push_back(names[j]);
  return row;
}

void write_beta_table_csv(const std::string& path,
                          const std::vector<InterpretabilityRow>& rows,
                          const std::string& stamp) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out.precision(17);
  if (!stamp.empty()) out << stamp << '\n';
  // Published layout lists the collision coefficient before occupancy.
  const std::array<std::size_t, 5> order{0, 2, 1, 3, 4};
  out << "model,beta_dir,beta_coll,beta_occ,beta_dangle,beta_ddist,sign_violations\n";
  for (const auto& row : rows) {
    const auto mask = variant_features(row.variant);
    out << row.name;
    for (std::size_t j : order) {
      out << ',';
      if (mask[j])
        out << row.beta[j];
      else
        out << '-';
    }
    out << ',' << row.sign_violations.size() << '\n';
  }
}

}  // namespace waydcm
