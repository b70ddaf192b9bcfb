#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "logsieve/model.hpp"

namespace logsieve {

/// Regularizer added to the squared distance so the score stays finite at the center.
inline constexpr double kScoreEpsilon = 1e-12;

enum class Criterion { f1, precision, recall };
std::string_view to_string(Criterion c);
std::optional<Criterion> parse_criterion(std::string_view s);

struct DecisionThreshold {
    double a_tilde = 0.0;
    Criterion criterion = Criterion::f1;
    double achieved = 0.0;  // criterion value on the validation set
};

enum class Verdict { normal, anomalous };
std::string_view to_string(Verdict v);

struct DetectionResult {
    double score = 0.0;
    Verdict verdict = Verdict::normal;
};

/// 1 / (||x||^2 + eps): the hypersphere center is the origin. Large = normal.
double normality_score(const RowVector& x);

/// Picks the threshold maximizing the criterion, where label 1 marks the
/// positive (anomalous) class and "anomalous iff score < threshold".
/// Candidates: midpoints between consecutive distinct scores plus one
/// sentinel below the minimum and one above the maximum. Ties go to the
/// smallest threshold.
DecisionThreshold select_threshold(std::span<const double> scores, std::span<const int> labels,
                                   Criterion criterion = Criterion::f1);

/// All candidate thresholds in ascending order (exposed for auditing).
std::vector<double> candidate_thresholds(std::span<const double> scores);

/// Criterion value of the rule "anomalous iff score < threshold".
double criterion_value(std::span<const double> scores, std::span<const int> labels, double threshold,
                       Criterion criterion);

DetectionResult detect_score(double score, const DecisionThreshold& threshold);
DetectionResult detect(const RowVector& x, const DecisionThreshold& threshold);

/// Anomalous iff any member is anomalous.
Verdict aggregate_sequence(std::span<const DetectionResult> verdicts);

}  // namespace logsieve
