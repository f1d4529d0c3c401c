#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fas {

inline constexpr const char* kLiveTag = "live";
inline constexpr int kManifestVersion = 1;

enum class Split { train, dev, test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct CropBox {
    int x = 0, y = 0, w = 0, h = 0;  // pixel rectangle, must lie inside the image
};

struct LabeledSample {
    std::string image_path;   // resolved against the manifest root
    int label = 0;            // 0 = live, 1 = spoof
    std::string attack_type = kLiveTag;
    std::string subject_id;
    Split split = Split::train;
    std::optional<CropBox> crop_box;
    std::string group;        // optional video/group id

    bool is_live() const { return label == 0; }
};

struct DatasetManifest {
    std::string root;
    int version = kManifestVersion;
    std::vector<LabeledSample> samples;
};

/// Declarative evaluation protocol. Filters select by split and attack type;
/// unseen_attacks are removed from train (and dev) and kept in test.
struct EvalProtocol {
    std::string name = "default";
    std::set<Split> train_splits{Split::train};
    std::set<Split> test_splits{Split::test};
    std::set<std::string> unseen_attacks;
    std::set<std::string> subjects;  // empty = all subjects

    bool train_filter(const LabeledSample& s) const;
    bool test_filter(const LabeledSample& s) const;
};

struct ResolvedProtocol {
    std::vector<LabeledSample> train_set;
    std::vector<LabeledSample> dev_set;   // dev split minus unseen attacks
    std::vector<LabeledSample> test_set;
};

/// Parses a line-delimited manifest (header line + one JSON record per line).
/// Errors carry the offending line number; invariant violations name samples.
DatasetManifest load_manifest(const std::string& path);
void write_manifest(const std::string& path, const DatasetManifest& manifest);

/// Checks manifest invariants (label/attack consistency, duplicate paths).
void validate_manifest(const DatasetManifest& manifest);

ResolvedProtocol resolve_protocol(const DatasetManifest& manifest, const EvalProtocol& protocol);

/// Protocol description file (JSON) or the literal string "default".
EvalProtocol load_protocol(const std::string& path_or_name);

}  // namespace fas
