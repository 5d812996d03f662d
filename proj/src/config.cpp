#include "meeqa/config.hpp"

#include <fstream>
#include <sstream>

#include "meeqa/errors.hpp"

namespace meeqa {

PipelineOptions RunConfig::pipeline() const {
    PipelineOptions p;
    p.mode = mode;
    p.window_before = window_before;
    p.window_after = window_after;
    p.max_len = max_len;
    return p;
}

ModelDims RunConfig::dims(int32_t vocab_size) const {
    ModelDims d;
    d.vocab_size = vocab_size;
    d.d_model = d_model;
    d.n_layers = n_layers;
    d.n_heads = n_heads;
    d.max_len = max_len;
    return d;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t;
    t.seed = seed;
    t.epochs = epochs;
    t.batch_size = batch_size;
    t.optim.lr = lr;
    t.optim.weight_decay = weight_decay;
    t.variant = variant;
    t.weights = weights;
    return t;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            out.push_back(std::stod(item));
        } catch (...) {
            throw ConfigError("cannot parse number \"" + item + "\"");
        }
    }
    if (out.empty()) throw ConfigError("empty number list");
    return out;
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    for (double v : parse_double_list(text)) out.push_back(static_cast<int>(v));
    return out;
}

std::map<std::string, std::string> load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::map<std::string, std::string> entries;
    std::string line;
    int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (!split_words(line).empty())
                throw ConfigError(path + " line " + std::to_string(line_no) +
                                  ": expected key = value");
            continue;
        }
        auto trim = [](std::string s) {
            size_t b = s.find_first_not_of(" \t\r");
            size_t e = s.find_last_not_of(" \t\r");
            if (b == std::string::npos) return std::string{};
            return s.substr(b, e - b + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(path + " line " + std::to_string(line_no) + ": empty key");
        entries[key] = value;
    }
    return entries;
}

void apply_config_entry(RunConfig& config, const std::string& key, const std::string& value) {
    auto as_int = [&](int lo) {
        int v;
        try {
            v = std::stoi(value);
        } catch (...) {
            throw ConfigError("config key " + key + ": cannot parse \"" + value + "\"");
        }
        if (v < lo) throw ConfigError("config key " + key + ": value below " + std::to_string(lo));
        return v;
    };
    auto as_double = [&]() {
        try {
            return std::stod(value);
        } catch (...) {
            throw ConfigError("config key " + key + ": cannot parse \"" + value + "\"");
        }
    };

    if (key == "seed") config.seed = static_cast<uint64_t>(std::stoull(value));
    else if (key == "k") config.window_before = as_int(0);
    else if (key == "l") config.window_after = as_int(1);
    else if (key == "max_len") config.max_len = as_int(8);
    else if (key == "speaker_mode") config.mode.speaker_mode = parse_speaker_mode(value);
    else if (key == "question_k") config.mode.question_k = as_int(0);
    else if (key == "utterance_marker") config.mode.utterance_marker = value == "true" || value == "1";
    else if (key == "d_model") config.d_model = as_int(1);
    else if (key == "layers") config.n_layers = as_int(1);
    else if (key == "heads") config.n_heads = as_int(1);
    else if (key == "epochs") config.epochs = as_int(0);
    else if (key == "batch_size") config.batch_size = as_int(1);
    else if (key == "lr") config.lr = as_double();
    else if (key == "weight_decay") config.weight_decay = as_double();
    else if (key == "loss") config.variant = parse_loss_variant(value);
    else if (key == "alpha") config.weights.alpha = as_double();
    else if (key == "beta") config.weights.beta = as_double();
    else if (key == "gamma") config.weights.gamma = as_double();
    else if (key == "tau1") config.decision.tau1 = as_double();
    else if (key == "tau2") config.decision.tau2 = as_double();
    else if (key == "max_answer_len") config.decision.max_answer_len = as_int(1);
    else if (key == "grid_alpha") config.loss_grids.alpha = parse_double_list(value);
    else if (key == "grid_beta") config.loss_grids.beta = parse_double_list(value);
    else if (key == "grid_gamma") config.loss_grids.gamma = parse_double_list(value);
    else if (key == "grid_tau1") config.decision_grids.tau1 = parse_double_list(value);
    else if (key == "grid_tau2") config.decision_grids.tau2 = parse_double_list(value);
    else if (key == "grid_max_answer_len")
        config.decision_grids.max_answer_len = parse_int_list(value);
    else throw ConfigError("unknown config key: " + key);
}

void apply_config_file(RunConfig& config, const std::string& path) {
    for (const auto& [key, value] : load_config_file(path))
        apply_config_entry(config, key, value);
}

} // namespace meeqa
