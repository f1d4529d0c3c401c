#include "fas/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace fas {

namespace {

void check_classes(const std::vector<ScoreRecord>& records) {
    bool has_live = false, has_spoof = false;
    for (const auto& r : records) {
        if (r.label == 0) has_live = true;
        else has_spoof = true;
    }
    if (!has_live || !has_spoof)
        throw std::invalid_argument("metrics: records must contain both live and spoof samples");
}

struct ErrorRates {
    double frr;  // live decided spoof
    double far;  // spoof decided live
};

ErrorRates error_rates(const std::vector<ScoreRecord>& records, double threshold) {
    std::size_t live = 0, live_rej = 0, spoof = 0, spoof_acc = 0;
    for (const auto& r : records) {
        const bool as_spoof = decide_spoof(r.score, threshold);
        if (r.label == 0) {
            ++live;
            if (as_spoof) ++live_rej;
        } else {
            ++spoof;
            if (!as_spoof) ++spoof_acc;
        }
    }
    return {double(live_rej) / double(live), double(spoof_acc) / double(spoof)};
}

}  // namespace

MetricsReport compute_acer_report(const std::vector<ScoreRecord>& records, double threshold) {
    check_classes(records);
    MetricsReport rep;
    rep.threshold = threshold;

    std::map<std::string, std::size_t> pai_total, pai_missed;
    std::size_t live = 0, live_rej = 0;
    for (const auto& r : records) {
        const bool as_spoof = decide_spoof(r.score, threshold);
        if (r.label == 0) {
            ++live;
            if (as_spoof) ++live_rej;
        } else {
            if (r.attack_type.empty() || r.attack_type == "live")
                throw std::invalid_argument("metrics: spoof record '" + r.sample_id +
                                            "' carries no valid PAI tag");
            ++pai_total[r.attack_type];
            if (!as_spoof) ++pai_missed[r.attack_type];
        }
    }
    rep.counts["live"] = live;
    rep.apcer = 0;
    for (const auto& [pai, total] : pai_total) {
        const double rate = double(pai_missed[pai]) / double(total);
        rep.apcer_per_pai[pai] = rate;
        rep.counts[pai] = total;
        rep.apcer = std::max(rep.apcer, rate);
    }
    rep.bpcer = double(live_rej) / double(live);
    rep.acer = (rep.apcer + rep.bpcer) / 2.0;
    return rep;
}

double compute_hter(const std::vector<ScoreRecord>& records, double threshold) {
    check_classes(records);
    const ErrorRates er = error_rates(records, threshold);
    return (er.frr + er.far) / 2.0;
}

double select_threshold(const std::vector<ScoreRecord>& dev_records) {
    check_classes(dev_records);
    std::set<double> scores;
    for (const auto& r : dev_records) scores.insert(r.score);
    std::vector<double> sorted(scores.begin(), scores.end());

    std::vector<double> candidates;
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i)
        candidates.push_back((sorted[i] + sorted[i + 1]) / 2.0);
    if (candidates.empty()) candidates.push_back(sorted.front());

    double best_t = candidates.front();
    double best_gap = std::numeric_limits<double>::infinity();
    for (double t : candidates) {
        if (t <= 0) continue;
        const ErrorRates er = error_rates(dev_records, t);
        const double gap = std::abs(er.frr - er.far);
        if (gap < best_gap) {  // strict: ties break toward the lower threshold
            best_gap = gap;
            best_t = t;
        }
    }
    return best_t;
}

std::string format_report(const MetricsReport& report) {
    std::ostringstream out;
    out.precision(6);
    out << "threshold = " << report.threshold << "\n";
    for (const auto& [pai, rate] : report.apcer_per_pai)
        out << "apcer[" << pai << "] = " << rate << "\n";
    out << "apcer = " << report.apcer << "\n";
    out << "bpcer = " << report.bpcer << "\n";
    out << "acer = " << report.acer << "\n";
    if (report.hter) out << "hter = " << *report.hter << "\n";
    for (const auto& [cls, n] : report.counts) out << "count[" << cls << "] = " << n << "\n";
    return out.str();
}

void write_report_json(const std::string& path, const MetricsReport& report) {
    nlohmann::json j;
    j["threshold"] = report.threshold;
    j["apcer_per_pai"] = report.apcer_per_pai;
    j["apcer"] = report.apcer;
    j["bpcer"] = report.bpcer;
    j["acer"] = report.acer;
    if (report.hter) j["hter"] = *report.hter;
    j["counts"] = report.counts;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace fas
