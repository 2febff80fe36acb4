#pragma once

#include <span>
#include <string>
#include <vector>

#include "cfbench/slt.hpp"

namespace cfbench {

enum class QualityMode { Best, Last };

/// Best = maximum of the curve, Last = final entry.
double quality_from_curve(std::span<const double> curve, QualityMode mode);

/// Best quality relative to the joint baseline; may exceed 1.
double omega_all(double q_best, double baseline);

enum class CfFlag { CF, NoCF };

std::string to_string(CfFlag flag);

/// 0.9 for D9-1, 0.5 for D5-5 and DP10-10.
double cf_threshold(SltType type);

/// CF iff q is strictly below the threshold of the task type.
CfFlag classify_cf(double q, SltType type);

struct MetricRecord {
    std::string dataset;
    std::string model;
    SltType slt_type = SltType::D5_5;
    std::string slt_variant;  // e.g. "D5-5a"; "min" for aggregates
    double q_best = 0.0;
    double q_last = 0.0;
    double baseline = 0.0;
    double omega_all = 0.0;   // q_best / baseline
    CfFlag cf_best = CfFlag::NoCF;
    CfFlag cf_last = CfFlag::NoCF;
    /// Aggregates only: minimum over the per-task omega values.
    double omega_all_min_per_slt = 0.0;
};

MetricRecord make_metric_record(std::string dataset, std::string model, const SltSpec& slt,
                                double q_best, double q_last, double baseline);

/// Field-wise minimum over tasks of one type; omega is recomputed from the
/// aggregated fields and the per-task minimum is kept alongside.
MetricRecord aggregate_over_slts(std::span<const MetricRecord> records);

}  // namespace cfbench
