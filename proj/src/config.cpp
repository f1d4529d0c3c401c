#include "fas/config.hpp"

#include <fstream>
#include <sstream>

namespace fas {

namespace {
template <std::size_t N>
std::array<std::size_t, N> widths_from_json(const nlohmann::json& j) {
    auto v = j.get<std::vector<std::size_t>>();
    if (v.size() != N)
        throw std::invalid_argument("config: expected " + std::to_string(N) + " widths");
    std::array<std::size_t, N> out{};
    std::copy(v.begin(), v.end(), out.begin());
    return out;
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        // trim
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}
}  // namespace

nlohmann::json to_json(const GeneratorConfig& c) {
    return {{"input_size", c.input_size},
            {"encoder_stage_widths", c.encoder_stage_widths},
            {"decoder_stage_widths", c.decoder_stage_widths},
            {"use_pretrained_encoder", c.use_pretrained_encoder},
            {"pretrained_path", c.pretrained_path},
            {"tap_layers", c.tap_layers}};
}
GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
    GeneratorConfig c;
    c.input_size = j.value("input_size", c.input_size);
    if (j.contains("encoder_stage_widths"))
        c.encoder_stage_widths = widths_from_json<5>(j["encoder_stage_widths"]);
    if (j.contains("decoder_stage_widths"))
        c.decoder_stage_widths = widths_from_json<5>(j["decoder_stage_widths"]);
    c.use_pretrained_encoder = j.value("use_pretrained_encoder", false);
    c.pretrained_path = j.value("pretrained_path", std::string());
    if (j.contains("tap_layers")) c.tap_layers = j["tap_layers"].get<std::vector<std::string>>();
    c.validate();
    return c;
}

nlohmann::json to_json(const ClassifierConfig& c) {
    return {{"input_mode", to_string(c.input_mode)}, {"backbone_widths", c.backbone_widths}};
}
ClassifierConfig classifier_config_from_json(const nlohmann::json& j) {
    ClassifierConfig c;
    if (j.contains("input_mode"))
        c.input_mode = classifier_input_mode_from_string(j["input_mode"].get<std::string>());
    if (j.contains("backbone_widths"))
        c.backbone_widths = widths_from_json<4>(j["backbone_widths"]);
    return c;
}

nlohmann::json to_json(const PipelineConfig& c) {
    return {{"input_mode", to_string(c.input_mode)},
            {"patch_size", c.patch_size},
            {"eval_patches", c.eval_patches},
            {"seed", c.seed}};
}
PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
    PipelineConfig c;
    if (j.contains("input_mode"))
        c.input_mode = input_mode_from_string(j["input_mode"].get<std::string>());
    c.patch_size = j.value("patch_size", c.patch_size);
    c.eval_patches = j.value("eval_patches", c.eval_patches);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"base_lr", c.base_lr},
            {"decay_factor", c.decay_factor},
            {"decay_every_steps", c.decay_every_steps},
            {"alpha1", c.weights.alpha1},
            {"alpha2", c.weights.alpha2},
            {"alpha3", c.weights.alpha3},
            {"margin", c.triplet.margin},
            {"seed", c.seed},
            {"checkpoint_dir", c.checkpoint_dir},
            {"checkpoint_every_epochs", c.checkpoint_every_epochs}};
}
TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.base_lr = j.value("base_lr", c.base_lr);
    c.decay_factor = j.value("decay_factor", c.decay_factor);
    c.decay_every_steps = j.value("decay_every_steps", c.decay_every_steps);
    c.weights.alpha1 = j.value("alpha1", c.weights.alpha1);
    c.weights.alpha2 = j.value("alpha2", c.weights.alpha2);
    c.weights.alpha3 = j.value("alpha3", c.weights.alpha3);
    c.triplet.margin = j.value("margin", c.triplet.margin);
    c.seed = j.value("seed", c.seed);
    c.checkpoint_dir = j.value("checkpoint_dir", c.checkpoint_dir);
    c.checkpoint_every_epochs = j.value("checkpoint_every_epochs", c.checkpoint_every_epochs);
    c.validate();
    return c;
}

std::map<std::string, std::string> read_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected key = value");
        auto trim = [](std::string s) {
            const auto x = s.find_first_not_of(" \t\r");
            const auto y = s.find_last_not_of(" \t\r");
            return x == std::string::npos ? std::string() : s.substr(x, y - x + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty())
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": empty key");
        kv[key] = val;
    }
    return kv;
}

ExperimentConfig experiment_from_kv(const std::map<std::string, std::string>& kv) {
    ExperimentConfig c;
    auto get = [&](const char* key) -> const std::string* {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };
    auto set_num = [&](const char* key, auto& field) {
        if (const auto* v = get(key)) field = static_cast<std::decay_t<decltype(field)>>(
            std::stod(*v));
    };
    set_num("batch_size", c.train.batch_size);
    set_num("epochs", c.train.epochs);
    set_num("base_lr", c.train.base_lr);
    set_num("decay_factor", c.train.decay_factor);
    set_num("decay_every_steps", c.train.decay_every_steps);
    set_num("alpha1", c.train.weights.alpha1);
    set_num("alpha2", c.train.weights.alpha2);
    set_num("alpha3", c.train.weights.alpha3);
    set_num("margin", c.train.triplet.margin);
    set_num("seed", c.train.seed);
    set_num("checkpoint_every_epochs", c.train.checkpoint_every_epochs);
    if (const auto* v = get("checkpoint_dir")) c.train.checkpoint_dir = *v;

    if (const auto* v = get("input_mode")) c.pipeline.input_mode = input_mode_from_string(*v);
    set_num("patch_size", c.pipeline.patch_size);
    set_num("eval_patches", c.pipeline.eval_patches);
    c.pipeline.seed = c.train.seed;

    set_num("input_size", c.generator.input_size);
    auto set_widths = [&](const char* key, auto& arr) {
        if (const auto* v = get(key)) {
            const auto parts = split_csv(*v);
            if (parts.size() != arr.size())
                throw std::runtime_error(std::string("config: ") + key + " expects " +
                                         std::to_string(arr.size()) + " comma-separated widths");
            for (std::size_t i = 0; i < arr.size(); ++i) arr[i] = std::stoul(parts[i]);
        }
    };
    set_widths("encoder_widths", c.generator.encoder_stage_widths);
    set_widths("decoder_widths", c.generator.decoder_stage_widths);
    if (const auto* v = get("tap_layers")) c.generator.tap_layers = split_csv(*v);
    if (const auto* v = get("use_pretrained_encoder"))
        c.generator.use_pretrained_encoder = (*v == "1" || *v == "true");
    if (const auto* v = get("pretrained_path")) c.generator.pretrained_path = *v;

    set_widths("classifier_widths", c.classifier.backbone_widths);
    if (const auto* v = get("classifier_input_mode"))
        c.classifier.input_mode = classifier_input_mode_from_string(*v);

    static const std::set<std::string> known = {
        "batch_size", "epochs", "base_lr", "decay_factor", "decay_every_steps",
        "alpha1", "alpha2", "alpha3", "margin", "seed", "checkpoint_dir",
        "checkpoint_every_epochs", "input_mode", "patch_size", "eval_patches",
        "input_size", "encoder_widths", "decoder_widths", "tap_layers",
        "use_pretrained_encoder", "pretrained_path", "classifier_widths",
        "classifier_input_mode"};
    for (const auto& [k, v] : kv)
        if (!known.count(k)) throw std::runtime_error("config: unknown key '" + k + "'");

    c.train.validate();
    c.pipeline.validate();
    c.generator.validate();
    return c;
}

}  // namespace fas
