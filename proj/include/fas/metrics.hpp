#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fas/scoring.hpp"

namespace fas {

struct MetricsReport {
    std::map<std::string, double> apcer_per_pai;  // attack type -> rate in [0, 1]
    double apcer = 0;   // max over PAIs
    double bpcer = 0;
    double acer = 0;
    std::optional<double> hter;
    double threshold = 0;
    std::map<std::string, std::size_t> counts;  // per-class/PAI sample counts
};

/// APCER per instrument (fraction of that PAI decided live), worst-case APCER,
/// BPCER (live decided spoof), ACER = (APCER + BPCER) / 2.
MetricsReport compute_acer_report(const std::vector<ScoreRecord>& records, double threshold);

/// HTER = (FRR + FAR) / 2 with all PAIs pooled.
double compute_hter(const std::vector<ScoreRecord>& records, double threshold);

/// Equal-error threshold: sweep midpoints between adjacent distinct sorted
/// scores, pick the one minimizing |FRR - FAR|, ties toward the lower value.
double select_threshold(const std::vector<ScoreRecord>& dev_records);

/// Key-value text rendering (rates as fractions; percent formatting is a CLI
/// concern).
std::string format_report(const MetricsReport& report);
void write_report_json(const std::string& path, const MetricsReport& report);

}  // namespace fas
