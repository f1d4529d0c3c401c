#include "fas/scoring.hpp"

#include <fstream>

#include <json.hpp>

namespace fas {

void write_score_file(const std::string& path, const std::vector<ScoreRecord>& records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open score file for writing: " + path);
    for (const auto& r : records) {
        nlohmann::json j{{"sample_id", r.sample_id},
                         {"score", r.score},
                         {"label", r.label},
                         {"attack_type", r.attack_type}};
        if (!r.group.empty()) j["group"] = r.group;
        out << j.dump() << "\n";
    }
}

std::vector<ScoreRecord> read_score_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open score file: " + path);
    std::vector<ScoreRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": score record parse error: " + e.what());
        }
        ScoreRecord r;
        r.sample_id = j.at("sample_id").get<std::string>();
        r.score = j.at("score").get<double>();
        r.label = j.at("label").get<int>();
        r.attack_type = j.at("attack_type").get<std::string>();
        if (j.contains("group")) r.group = j["group"].get<std::string>();
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace fas
