#include "fas/datamodel.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <stdexcept>

#include <json.hpp>

namespace fs = std::filesystem;

namespace fas {

std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::dev: return "dev";
        case Split::test: return "test";
    }
    return "train";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "dev") return Split::dev;
    if (s == "test") return Split::test;
    throw std::invalid_argument("unknown split '" + s + "' (expected train/dev/test)");
}

bool EvalProtocol::train_filter(const LabeledSample& s) const {
    if (!train_splits.count(s.split)) return false;
    if (unseen_attacks.count(s.attack_type)) return false;
    if (!subjects.empty() && !subjects.count(s.subject_id)) return false;
    return true;
}

bool EvalProtocol::test_filter(const LabeledSample& s) const {
    if (!test_splits.count(s.split)) return false;
    if (!subjects.empty() && !subjects.count(s.subject_id)) return false;
    return true;
}

namespace {

const std::set<std::string> kKnownFields = {"path", "label", "attack_type", "subject_id",
                                            "split", "crop_box", "group"};

LabeledSample parse_sample(const nlohmann::json& j, const std::string& path,
                           std::size_t lineno) {
    auto fail = [&](const std::string& msg) -> std::runtime_error {
        return std::runtime_error(path + ":" + std::to_string(lineno) + ": " + msg);
    };
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!kKnownFields.count(it.key()))
            std::cerr << "warning: " << path << ":" << lineno << ": ignoring unknown field '"
                      << it.key() << "'\n";
    LabeledSample s;
    if (!j.contains("path")) throw fail("missing field 'path'");
    s.image_path = j["path"].get<std::string>();
    if (!j.contains("label")) throw fail("missing field 'label'");
    const auto& lbl = j["label"];
    if (lbl.is_string())
        s.label = lbl.get<std::string>() == kLiveTag ? 0 : 1;
    else
        s.label = lbl.get<int>() == 0 ? 0 : 1;
    s.attack_type = j.value("attack_type", std::string(kLiveTag));
    s.subject_id = j.value("subject_id", std::string());
    try {
        s.split = split_from_string(j.value("split", std::string("train")));
    } catch (const std::exception& e) {
        throw fail(e.what());
    }
    if (j.contains("crop_box")) {
        const auto& cb = j["crop_box"];
        if (!cb.is_array() || cb.size() != 4) throw fail("crop_box must be [x, y, w, h]");
        CropBox box{cb[0].get<int>(), cb[1].get<int>(), cb[2].get<int>(), cb[3].get<int>()};
        if (box.x < 0 || box.y < 0 || box.w <= 0 || box.h <= 0)
            throw fail("crop_box must be a nonnegative rectangle with positive size");
        s.crop_box = box;
    }
    s.group = j.value("group", std::string());

    if (s.is_live() != (s.attack_type == kLiveTag))
        throw fail("sample '" + s.image_path + "': label '" +
                   (s.is_live() ? "live" : "spoof") + "' contradicts attack_type '" +
                   s.attack_type + "'");
    return s;
}

}  // namespace

void validate_manifest(const DatasetManifest& manifest) {
    if (manifest.version != kManifestVersion)
        throw std::runtime_error("manifest version " + std::to_string(manifest.version) +
                                 " unsupported (expected " + std::to_string(kManifestVersion) +
                                 ")");
    std::map<std::pair<int, std::string>, std::string> seen;  // (split, path) -> first owner
    for (const auto& s : manifest.samples) {
        if (s.is_live() != (s.attack_type == kLiveTag))
            throw std::runtime_error("manifest invariant: sample '" + s.image_path +
                                     "' label contradicts attack_type '" + s.attack_type + "'");
        const auto key = std::make_pair(int(s.split), s.image_path);
        auto [it, inserted] = seen.emplace(key, s.image_path);
        if (!inserted)
            throw std::runtime_error("manifest invariant: duplicate image_path '" +
                                     s.image_path + "' in split " + to_string(s.split));
    }
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    DatasetManifest m;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": parse error: " + e.what());
        }
        if (!have_header) {
            if (!j.contains("manifest_version"))
                throw std::runtime_error(path + ":1: first line must carry manifest_version");
            m.version = j["manifest_version"].get<int>();
            m.root = j.value("root", std::string());
            have_header = true;
            continue;
        }
        m.samples.push_back(parse_sample(j, path, lineno));
    }
    if (!have_header) throw std::runtime_error(path + ": empty manifest");

    // resolve root and relative sample paths
    fs::path base = fs::path(path).parent_path();
    fs::path root = m.root.empty() ? base : fs::path(m.root);
    if (root.is_relative()) root = base / root;
    m.root = root.string();
    for (auto& s : m.samples) {
        fs::path p(s.image_path);
        if (p.is_relative()) s.image_path = (root / p).lexically_normal().string();
    }
    validate_manifest(m);
    return m;
}

void write_manifest(const std::string& path, const DatasetManifest& manifest) {
    validate_manifest(manifest);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    nlohmann::json header{{"manifest_version", manifest.version}};
    if (!manifest.root.empty()) header["root"] = manifest.root;
    out << header.dump() << "\n";
    const fs::path root(manifest.root);
    for (const auto& s : manifest.samples) {
        fs::path p(s.image_path);
        std::string rel = p.string();
        if (!manifest.root.empty() && p.is_absolute()) {
            auto r = p.lexically_relative(root);
            if (!r.empty() && r.native().rfind("..", 0) != 0) rel = r.string();
        }
        nlohmann::json j{{"path", rel},
                         {"label", s.is_live() ? "live" : "spoof"},
                         {"attack_type", s.attack_type},
                         {"subject_id", s.subject_id},
                         {"split", to_string(s.split)}};
        if (s.crop_box)
            j["crop_box"] = {s.crop_box->x, s.crop_box->y, s.crop_box->w, s.crop_box->h};
        if (!s.group.empty()) j["group"] = s.group;
        out << j.dump() << "\n";
    }
}

ResolvedProtocol resolve_protocol(const DatasetManifest& manifest,
                                  const EvalProtocol& protocol) {
    ResolvedProtocol r;
    for (const auto& s : manifest.samples) {
        if (protocol.train_filter(s)) r.train_set.push_back(s);
        if (protocol.test_filter(s)) r.test_set.push_back(s);
        if (s.split == Split::dev && !protocol.unseen_attacks.count(s.attack_type) &&
            (protocol.subjects.empty() || protocol.subjects.count(s.subject_id)))
            r.dev_set.push_back(s);
    }
    if (r.train_set.empty())
        throw std::runtime_error("protocol '" + protocol.name + "': empty train set");
    if (r.test_set.empty())
        throw std::runtime_error("protocol '" + protocol.name + "': empty test set");
    return r;
}

EvalProtocol load_protocol(const std::string& path_or_name) {
    EvalProtocol p;
    if (path_or_name.empty() || path_or_name == "default") return p;
    std::ifstream in(path_or_name);
    if (!in) throw std::runtime_error("cannot open protocol file: " + path_or_name);
    nlohmann::json j;
    in >> j;
    p.name = j.value("name", path_or_name);
    auto read_splits = [&](const char* key, std::set<Split>& out) {
        if (!j.contains(key)) return;
        out.clear();
        for (const auto& s : j[key]) out.insert(split_from_string(s.get<std::string>()));
    };
    read_splits("train_splits", p.train_splits);
    read_splits("test_splits", p.test_splits);
    if (j.contains("unseen_attacks"))
        for (const auto& a : j["unseen_attacks"]) {
            const auto tag = a.get<std::string>();
            if (tag == kLiveTag)
                throw std::runtime_error("protocol: 'live' cannot be an unseen attack");
            p.unseen_attacks.insert(tag);
        }
    if (j.contains("subjects"))
        for (const auto& s : j["subjects"]) p.subjects.insert(s.get<std::string>());
    return p;
}

}  // namespace fas
