#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "meeqa/decision.hpp"
#include "meeqa/model.hpp"
#include "meeqa/pipeline.hpp"
#include "meeqa/representation.hpp"

namespace meeqa {

// One run's knobs with the defaults used by every experiment: k=1, l=60,
// 512-token inputs, two epochs of batch-8 AdamW at 3e-5.
struct RunConfig {
    uint64_t seed = 7;
    int window_before = 1;
    int window_after = 60;
    int max_len = 512;
    RepresentationMode mode; // switch speakers, question_k = 1

    int d_model = 64;
    int n_layers = 2;
    int n_heads = 2;

    int epochs = 2;
    int batch_size = 8;
    double lr = 3e-5;
    double weight_decay = 0.01;

    LossVariant variant = LossVariant::FlatHierarchical;
    LossWeights weights;
    DecisionConfig decision;

    LossGrids loss_grids;
    DecisionGrids decision_grids;

    PipelineOptions pipeline() const;
    ModelDims dims(int32_t vocab_size) const;
    TrainConfig train_config() const;
};

// Flat key = value file; '#' starts a comment. Unknown keys raise ConfigError.
std::map<std::string, std::string> load_config_file(const std::string& path);
void apply_config_entry(RunConfig& config, const std::string& key, const std::string& value);
void apply_config_file(RunConfig& config, const std::string& path);

std::vector<double> parse_double_list(const std::string& text);
std::vector<int> parse_int_list(const std::string& text);

} // namespace meeqa
