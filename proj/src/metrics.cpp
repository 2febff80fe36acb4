#include "cfbench/metrics.hpp"

#include <algorithm>

#include "cfbench/errors.hpp"

namespace cfbench {

double quality_from_curve(std::span<const double> curve, QualityMode mode) {
    if (curve.empty())
        throw DataError("quality of an empty curve");
    if (mode == QualityMode::Last)
        return curve.back();
    return *std::max_element(curve.begin(), curve.end());
}

double omega_all(double q_best, double baseline) {
    if (!(baseline > 0.0))
        throw DataError("omega_all needs a positive baseline");
    return q_best / baseline;
}

std::string to_string(CfFlag flag) { return flag == CfFlag::CF ? "CF" : "no-CF"; }

double cf_threshold(SltType type) { return type == SltType::D9_1 ? 0.9 : 0.5; }

CfFlag classify_cf(double q, SltType type) {
    return q < cf_threshold(type) ? CfFlag::CF : CfFlag::NoCF;
}

MetricRecord make_metric_record(std::string dataset, std::string model, const SltSpec& slt,
                                double q_best, double q_last, double baseline) {
    MetricRecord r;
    r.dataset = std::move(dataset);
    r.model = std::move(model);
    r.slt_type = slt.type;
    r.slt_variant = slt.name;
    r.q_best = q_best;
    r.q_last = q_last;
    r.baseline = baseline;
    r.omega_all = omega_all(q_best, baseline);
    r.omega_all_min_per_slt = r.omega_all;
    r.cf_best = classify_cf(q_best, slt.type);
    r.cf_last = classify_cf(q_last, slt.type);
    return r;
}

MetricRecord aggregate_over_slts(std::span<const MetricRecord> records) {
    if (records.empty())
        throw DataError("nothing to aggregate");
    const MetricRecord& first = records.front();
    MetricRecord agg = first;
    for (const auto& r : records) {
        if (r.dataset != first.dataset || r.model != first.model || r.slt_type != first.slt_type)
            throw DataError("cannot aggregate records of different dataset/model/task type");
        agg.q_best = std::min(agg.q_best, r.q_best);
        agg.q_last = std::min(agg.q_last, r.q_last);
        agg.baseline = std::min(agg.baseline, r.baseline);
        agg.omega_all_min_per_slt = std::min(agg.omega_all_min_per_slt, r.omega_all_min_per_slt);
    }
    agg.slt_variant = records.size() == 1 ? first.slt_variant : "min";
    agg.omega_all = omega_all(agg.q_best, agg.baseline);
    agg.cf_best = classify_cf(agg.q_best, agg.slt_type);
    agg.cf_last = classify_cf(agg.q_last, agg.slt_type);
    return agg;
}

}  // namespace cfbench
