// meeqa: ingestion, preprocessing, training, prediction and evaluation for
// extractive QA over multi-speaker meeting transcripts.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "meeqa/config.hpp"
#include "meeqa/errors.hpp"
#include "meeqa/evaluation.hpp"
#include "meeqa/pipeline.hpp"
#include "meeqa/preprocess.hpp"
#include "meeqa/synthetic.hpp"
#include "meeqa/transcript_io.hpp"

namespace {

using namespace meeqa;
using nlohmann::json;

struct CommonFlags {
    std::optional<std::string> config_path;
    std::optional<uint64_t> seed;
    std::optional<int> k, l, max_len, question_k;
    std::optional<std::string> speaker_mode;
    std::optional<bool> utterance_marker;
    std::optional<int> d_model, layers, heads, epochs, batch_size;
    std::optional<double> lr, weight_decay;
    std::optional<std::string> loss;
    std::optional<double> alpha, beta, gamma, tau1, tau2;
    std::optional<int> max_answer_len;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "flat key=value config file");
    cmd->add_option("--seed", f.seed, "PRNG seed for the whole run");
    cmd->add_option("--k", f.k, "utterances before the question");
    cmd->add_option("--l", f.l, "utterances after the question");
    cmd->add_option("--max-len", f.max_len, "maximum input length in tokens");
    cmd->add_option("--speaker-mode", f.speaker_mode, "original|switch")
        ->check(CLI::IsMember({"original", "switch"}));
    cmd->add_option("--question-k", f.question_k, "previous utterances rendered with the question");
    cmd->add_flag("--utterance-marker,!--no-utterance-marker", f.utterance_marker,
                  "emit the \"&\" utterance marker before speaker tokens");
    cmd->add_option("--d-model", f.d_model, "encoder width");
    cmd->add_option("--layers", f.layers, "encoder layers");
    cmd->add_option("--heads", f.heads, "attention heads");
    cmd->add_option("--epochs", f.epochs, "training epochs");
    cmd->add_option("--batch-size", f.batch_size, "training batch size");
    cmd->add_option("--lr", f.lr, "learning rate");
    cmd->add_option("--weight-decay", f.weight_decay, "decoupled weight decay");
    cmd->add_option("--loss", f.loss, "fhl|no-ha|no-pse|no-lse")
        ->check(CLI::IsMember({"fhl", "no-ha", "no-pse", "no-lse"}));
    cmd->add_option("--alpha", f.alpha, "answerability loss weight");
    cmd->add_option("--beta", f.beta, "predicted-answerability span weight");
    cmd->add_option("--gamma", f.gamma, "gold-answerability span weight");
    cmd->add_option("--tau1", f.tau1, "answerability threshold");
    cmd->add_option("--tau2", f.tau2, "best-span probability threshold");
    cmd->add_option("--max-answer-len", f.max_answer_len, "answer length cap in tokens");
}

RunConfig resolve_config(const CommonFlags& f) {
    RunConfig cfg;
    if (f.config_path) apply_config_file(cfg, *f.config_path);
    if (f.seed) cfg.seed = *f.seed;
    if (f.k) cfg.window_before = *f.k;
    if (f.l) cfg.window_after = *f.l;
    if (f.max_len) cfg.max_len = *f.max_len;
    if (f.speaker_mode) cfg.mode.speaker_mode = parse_speaker_mode(*f.speaker_mode);
    if (f.question_k) cfg.mode.question_k = *f.question_k;
    if (f.utterance_marker) cfg.mode.utterance_marker = *f.utterance_marker;
    if (f.d_model) cfg.d_model = *f.d_model;
    if (f.layers) cfg.n_layers = *f.layers;
    if (f.heads) cfg.n_heads = *f.heads;
    if (f.epochs) cfg.epochs = *f.epochs;
    if (f.batch_size) cfg.batch_size = *f.batch_size;
    if (f.lr) cfg.lr = *f.lr;
    if (f.weight_decay) cfg.weight_decay = *f.weight_decay;
    if (f.loss) cfg.variant = parse_loss_variant(*f.loss);
    if (f.alpha) cfg.weights.alpha = *f.alpha;
    if (f.beta) cfg.weights.beta = *f.beta;
    if (f.gamma) cfg.weights.gamma = *f.gamma;
    if (f.tau1) cfg.decision.tau1 = *f.tau1;
    if (f.tau2) cfg.decision.tau2 = *f.tau2;
    if (f.max_answer_len) cfg.decision.max_answer_len = *f.max_answer_len;
    cfg.mode.validate();
    if (cfg.window_before < cfg.mode.question_k)
        cfg.window_before = cfg.mode.question_k;
    return cfg;
}

json mode_to_json(const RepresentationMode& mode) {
    return {{"speaker_mode", speaker_mode_name(mode.speaker_mode)},
            {"question_k", mode.question_k},
            {"utterance_marker", mode.utterance_marker}};
}

RepresentationMode mode_from_json(const json& j) {
    RepresentationMode mode;
    mode.speaker_mode = parse_speaker_mode(j.value("speaker_mode", "switch"));
    mode.question_k = j.value("question_k", 1);
    mode.utterance_marker = j.value("utterance_marker", false);
    return mode;
}

// ---------------------------------------------------------------- preprocess

struct PreprocessArgs {
    std::string in, out;
    std::string report;
    std::string fillers_path;
    bool keep_repetitions = false;
    bool strict_one_char = false;
    bool no_merge = false;
};

int cmd_preprocess(const PreprocessArgs& args) {
    CleanOptions options;
    if (!args.fillers_path.empty()) options.fillers = load_filler_lexicon(args.fillers_path);
    options.collapse_repetitions = !args.keep_repetitions;
    options.keep_a_and_i = !args.strict_one_char;
    options.merge_speakers = !args.no_merge;

    auto meetings = read_meetings_file(args.in);
    CleanReport report;
    std::vector<Meeting> cleaned;
    for (const auto& m : meetings) cleaned.push_back(preprocess_meeting(m, options, &report));
    write_meetings_file(args.out, cleaned);

    json jr = {{"removed_comments", report.removed_comments},
               {"removed_fillers", report.removed_fillers},
               {"removed_repetitions", report.removed_repetitions},
               {"removed_symbols", report.removed_symbols},
               {"merged_spans", report.merged_spans},
               {"dropped_instances", report.dropped_instances}};
    std::string report_path = args.report.empty() ? args.out + ".report.json" : args.report;
    std::ofstream rout(report_path);
    if (!rout) throw DataError("cannot write report " + report_path);
    rout << jr.dump(2) << "\n";
    std::cout << "preprocessed " << meetings.size() << " meetings -> " << args.out << "\n";
    return 0;
}

// --------------------------------------------------------------------- train

struct TrainArgs {
    std::string train_path, vocab_path, checkpoint_path, history_path;
    CommonFlags flags;
};

int cmd_train(const TrainArgs& args) {
    RunConfig cfg = resolve_config(args.flags);
    cfg.weights.validate();
    auto meetings = read_meetings_file(args.train_path);

    Vocabulary vocab = std::filesystem::exists(args.vocab_path)
                           ? Vocabulary::load(args.vocab_path)
                           : build_vocabulary(meetings, cfg.pipeline());
    if (!std::filesystem::exists(args.vocab_path)) vocab.save(args.vocab_path);

    DatasetBundle bundle = build_dataset(meetings, cfg.pipeline(), vocab);
    if (bundle.training_inputs.empty()) throw ConfigError("train: no trainable instances");
    if (bundle.stats.skipped_too_long > 0)
        std::cerr << "skipped " << bundle.stats.skipped_too_long
                  << " questions whose pre-question segment exceeds the input length\n";
    if (bundle.stats.gold_truncated > 0)
        std::cerr << bundle.stats.gold_truncated
                  << " gold spans fell outside the encoded input (targets moved to [CLS])\n";

    TrainHistory history;
    ModelParams params =
        train_model(bundle.training_inputs, cfg.dims(vocab.size()), cfg.train_config(), &history);

    json meta = {{"mode", mode_to_json(cfg.mode)},
                 {"k", cfg.window_before},
                 {"l", cfg.window_after},
                 {"loss", loss_variant_name(cfg.variant)},
                 {"weights",
                  {{"alpha", cfg.weights.alpha},
                   {"beta", cfg.weights.beta},
                   {"gamma", cfg.weights.gamma}}},
                 {"seed", cfg.seed}};
    save_checkpoint(args.checkpoint_path, params, meta.dump());

    json jh = {{"epoch_mean_loss", history.epoch_mean_loss},
               {"instances", bundle.training_inputs.size()},
               {"epochs", cfg.epochs},
               {"batch_size", cfg.batch_size},
               {"lr", cfg.lr},
               {"loss", loss_variant_name(cfg.variant)},
               {"seed", cfg.seed}};
    std::string history_path =
        args.history_path.empty() ? args.checkpoint_path + ".history.json" : args.history_path;
    std::ofstream hout(history_path);
    if (!hout) throw DataError("cannot write history " + history_path);
    hout << jh.dump(2) << "\n";

    std::cout << "trained on " << bundle.training_inputs.size() << " instances";
    for (size_t e = 0; e < history.epoch_mean_loss.size(); ++e)
        std::cout << (e == 0 ? "; epoch losses: " : ", ") << history.epoch_mean_loss[e];
    std::cout << "\n";
    return 0;
}

// ------------------------------------------------------------------- predict

struct PredictArgs {
    std::string checkpoint_path, vocab_path, data_path, out_path;
    CommonFlags flags;
};

int cmd_predict(const PredictArgs& args) {
    Checkpoint ck = load_checkpoint(args.checkpoint_path);
    Vocabulary vocab = Vocabulary::load(args.vocab_path);
    if (vocab.size() != ck.params.dims.vocab_size)
        throw DataError("vocabulary size " + std::to_string(vocab.size()) +
                        " does not match the checkpoint (" +
                        std::to_string(ck.params.dims.vocab_size) + ")");

    json meta = json::parse(ck.meta_json);
    RunConfig cfg;
    cfg.mode = mode_from_json(meta.value("mode", json::object()));
    cfg.window_before = meta.value("k", 1);
    cfg.window_after = meta.value("l", 60);
    cfg.max_len = ck.params.dims.max_len;
    // decision flags and window overrides
    const CommonFlags& f = args.flags;
    if (f.k) cfg.window_before = *f.k;
    if (f.l) cfg.window_after = *f.l;
    if (f.tau1) cfg.decision.tau1 = *f.tau1;
    if (f.tau2) cfg.decision.tau2 = *f.tau2;
    if (f.max_answer_len) cfg.decision.max_answer_len = *f.max_answer_len;

    auto meetings = read_meetings_file(args.data_path);
    DatasetBundle bundle = build_dataset(meetings, cfg.pipeline(), vocab);
    auto predictions = predict_answers(ck.params, bundle, cfg.decision);
    write_predictions_file(args.out_path, predictions);
    std::cout << "wrote " << predictions.size() << " predictions -> " << args.out_path << "\n";
    return 0;
}

// ------------------------------------------------------------------ evaluate

struct EvaluateArgs {
    std::string predictions_path, gold_path, report_path;
    std::string mode = "standard";
    std::string baseline = "model";
    bool first_utterance_suffix = false;
    CommonFlags flags;
};

int cmd_evaluate(const EvaluateArgs& args) {
    RunConfig cfg = resolve_config(args.flags);
    auto meetings = read_meetings_file(args.gold_path);
    auto instances = all_instances(meetings, cfg.window_before, cfg.window_after);

    std::vector<PredictedAnswer> predictions;
    if (args.baseline == "first-utterance") {
        for (const auto& inst : instances)
            predictions.push_back(first_utterance_baseline(
                inst, args.first_utterance_suffix ? FirstUtteranceMode::IncludeSuffix
                                                  : FirstUtteranceMode::FullUtterance));
    } else {
        predictions = read_predictions_file(args.predictions_path);
    }

    EvalReport report = evaluate(predictions, instances, parse_eval_mode(args.mode));
    std::cout << report.to_table();
    if (!args.report_path.empty()) {
        std::ofstream out(args.report_path);
        if (!out) throw DataError("cannot write report " + args.report_path);
        out << report.to_json() << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------- gridsearch

struct GridSearchArgs {
    std::string train_path, dev_path, out_dir;
    CommonFlags flags;
};

int cmd_gridsearch(const GridSearchArgs& args) {
    RunConfig cfg = resolve_config(args.flags);
    auto train = read_meetings_file(args.train_path);
    auto dev = read_meetings_file(args.dev_path);

    GridSearchResult result =
        run_grid_search(train, dev, cfg.pipeline(), cfg.dims(0), cfg.train_config(),
                        cfg.loss_grids, cfg.decision_grids);

    std::filesystem::create_directories(args.out_dir);
    json jl = json::array();
    for (const auto& e : result.leaderboard) {
        jl.push_back({{"alpha", e.weights.alpha},
                      {"beta", e.weights.beta},
                      {"gamma", e.weights.gamma},
                      {"tau1", e.decision.tau1},
                      {"tau2", e.decision.tau2},
                      {"max_answer_len", e.decision.max_answer_len},
                      {"dev_all_f1", e.dev_all_f1},
                      {"dev_all_em", e.dev_all_em}});
    }
    {
        std::ofstream out(args.out_dir + "/leaderboard.json");
        if (!out) throw DataError("cannot write leaderboard");
        out << jl.dump(2) << "\n";
    }
    const GridSearchEntry& best = result.leaderboard.front();
    {
        std::ofstream out(args.out_dir + "/best_config.conf");
        if (!out) throw DataError("cannot write best config");
        out << "alpha = " << best.weights.alpha << "\n"
            << "beta = " << best.weights.beta << "\n"
            << "gamma = " << best.weights.gamma << "\n"
            << "tau1 = " << best.decision.tau1 << "\n"
            << "tau2 = " << best.decision.tau2 << "\n"
            << "max_answer_len = " << best.decision.max_answer_len << "\n";
    }
    std::cout << "alpha beta gamma tau1 tau2 m    dev-F1   dev-EM\n";
    for (const auto& e : result.leaderboard) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%5.2f %4.2f %5.2f %4.2f %4.2f %-4d %7.2f %7.2f\n",
                      e.weights.alpha, e.weights.beta, e.weights.gamma, e.decision.tau1,
                      e.decision.tau2, e.decision.max_answer_len, e.dev_all_f1, e.dev_all_em);
        std::cout << buf;
    }
    return 0;
}

// ----------------------------------------------------------------- agreement

struct AgreementArgs {
    std::string data_path;
    CommonFlags flags;
};

int cmd_agreement(const AgreementArgs& args) {
    RunConfig cfg = resolve_config(args.flags);
    auto meetings = read_meetings_file(args.data_path);
    auto instances = all_instances(meetings, cfg.window_before, cfg.window_after);
    bool degenerate = false;
    double alpha = krippendorff_alpha(agreement_items(instances), &degenerate);
    if (degenerate)
        std::cerr << "warning: zero expected disagreement, alpha = 1 by convention\n";
    std::cout << "krippendorff_alpha " << alpha << "\n";
    return 0;
}

// --------------------------------------------------------------------- synth

struct SynthArgs {
    std::string out_path;
    int questions = 100;
    double unanswerable_fraction = 0.3;
    double decoy_fraction = 0.0;
    int judges = 1;
    uint64_t seed = 1;
};

int cmd_synth(const SynthArgs& args) {
    SyntheticOptions options;
    options.n_questions = args.questions;
    options.unanswerable_fraction = args.unanswerable_fraction;
    options.decoy_fraction = args.decoy_fraction;
    options.judges = args.judges;
    options.seed = args.seed;
    write_meetings_file(args.out_path, generate_marker_corpus(options));
    std::cout << "wrote " << args.questions << " synthetic questions -> " << args.out_path
              << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"extractive QA over multi-speaker meeting transcripts"};
    app.require_subcommand(1);

    PreprocessArgs pre;
    auto* cmd_pre = app.add_subcommand("preprocess", "clean a transcript JSONL file");
    cmd_pre->add_option("--in", pre.in, "input meetings JSONL")->required();
    cmd_pre->add_option("--out", pre.out, "cleaned meetings JSONL")->required();
    cmd_pre->add_option("--report", pre.report, "cleaning report JSON path");
    cmd_pre->add_option("--fillers", pre.fillers_path, "filler lexicon, one token per line");
    cmd_pre->add_flag("--keep-repetitions", pre.keep_repetitions,
                      "do not collapse repeated n-grams");
    cmd_pre->add_flag("--strict-one-char", pre.strict_one_char,
                      "also remove the one-character words \"a\" and \"I\"");
    cmd_pre->add_flag("--no-merge", pre.no_merge, "keep consecutive same-speaker utterances");

    TrainArgs train;
    auto* cmd_tr = app.add_subcommand("train", "train a model");
    cmd_tr->add_option("--train", train.train_path, "training meetings JSONL")->required();
    cmd_tr->add_option("--vocab", train.vocab_path, "vocabulary file (built when missing)")
        ->required();
    cmd_tr->add_option("--checkpoint", train.checkpoint_path, "checkpoint output")->required();
    cmd_tr->add_option("--history", train.history_path, "training history JSON path");
    add_common_flags(cmd_tr, train.flags);

    PredictArgs predict;
    auto* cmd_pr = app.add_subcommand("predict", "write span predictions for a data file");
    cmd_pr->add_option("--checkpoint", predict.checkpoint_path, "model checkpoint")->required();
    cmd_pr->add_option("--vocab", predict.vocab_path, "vocabulary file")->required();
    cmd_pr->add_option("--data", predict.data_path, "meetings JSONL to answer")->required();
    cmd_pr->add_option("--out", predict.out_path, "predictions JSONL output")->required();
    add_common_flags(cmd_pr, predict.flags);

    EvaluateArgs eval;
    auto* cmd_ev = app.add_subcommand("evaluate", "score predictions against gold annotations");
    cmd_ev->add_option("--predictions", eval.predictions_path, "predictions JSONL");
    cmd_ev->add_option("--gold", eval.gold_path, "gold meetings JSONL")->required();
    cmd_ev->add_option("--mode", eval.mode, "standard|human-comparable")
        ->check(CLI::IsMember({"standard", "human-comparable"}));
    cmd_ev->add_option("--report", eval.report_path, "report JSON output path");
    cmd_ev->add_option("--baseline", eval.baseline, "model|first-utterance")
        ->check(CLI::IsMember({"model", "first-utterance"}));
    cmd_ev->add_flag("--first-utterance-suffix", eval.first_utterance_suffix,
                     "let the baseline answer with the question-utterance suffix");
    add_common_flags(cmd_ev, eval.flags);

    GridSearchArgs grid;
    auto* cmd_gs = app.add_subcommand("gridsearch", "sweep loss weights and thresholds");
    cmd_gs->add_option("--train", grid.train_path, "training meetings JSONL")->required();
    cmd_gs->add_option("--dev", grid.dev_path, "development meetings JSONL")->required();
    cmd_gs->add_option("--out-dir", grid.out_dir, "output directory")->required();
    add_common_flags(cmd_gs, grid.flags);

    AgreementArgs agree;
    auto* cmd_ag = app.add_subcommand("agreement", "inter-annotator agreement of a data file");
    cmd_ag->add_option("--data", agree.data_path, "meetings JSONL")->required();
    add_common_flags(cmd_ag, agree.flags);

    SynthArgs synth;
    auto* cmd_sy = app.add_subcommand("synth", "generate a synthetic marker-task corpus");
    cmd_sy->add_option("--out", synth.out_path, "output meetings JSONL")->required();
    cmd_sy->add_option("--questions", synth.questions, "number of questions");
    cmd_sy->add_option("--unanswerable-frac", synth.unanswerable_fraction,
                       "fraction of unanswerable questions");
    cmd_sy->add_option("--decoy-frac", synth.decoy_fraction,
                       "fraction of unanswerable questions that carry a decoy span");
    cmd_sy->add_option("--judges", synth.judges, "annotations per question");
    cmd_sy->add_option("--seed", synth.seed, "generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (cmd_pre->parsed()) return cmd_preprocess(pre);
        if (cmd_tr->parsed()) return cmd_train(train);
        if (cmd_pr->parsed()) return cmd_predict(predict);
        if (cmd_ev->parsed()) return cmd_evaluate(eval);
        if (cmd_gs->parsed()) return cmd_gridsearch(grid);
        if (cmd_ag->parsed()) return cmd_agreement(agree);
        if (cmd_sy->parsed()) return cmd_synth(synth);
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
