#include <algorithm>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "oodratio/data_io.hpp"
#include "oodratio/error.hpp"
#include "oodratio/harness.hpp"
#include "oodratio/ngram.hpp"

namespace {

using namespace oodratio;

std::vector<CriterionKind> parse_criteria_flags(
    const std::vector<std::string>& names) {
    std::vector<CriterionKind> kinds;
    for (const auto& name : names) {
        const CriterionKind kind = parse_criterion(name);
        if (std::find(kinds.begin(), kinds.end(), kind) != kinds.end()) {
            raise(ErrorCode::ConfigError, "criterion \"" + name + "\" given twice");
        }
        kinds.push_back(kind);
    }
    return kinds;
}

struct TrainFlags {
    std::string corpus;
    std::string format;
    std::string out;
    int order = 3;
    double k = 1.0;
};

struct AdaptFlags {
    std::string base;
    std::string corpus;
    std::string format;
    std::string out;
    double alpha = 5.0;
};

struct ScoreFlags {
    std::string config_path;
    std::string base_model;
    std::string finetuned_model;
    std::string input;
    std::string format;
    std::string out = "scores.jsonl";
    std::vector<std::string> criteria;
    std::optional<long long> max_bytes;
    std::optional<int> max_concurrency;
};

struct ReportFlags {
    std::string input;
    std::string format = "markdown";
    std::string out;
};

// Flag overrides shared by the eval-shaped subcommands; every field maps
// onto one ExperimentConfig field.
struct EvalFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<double> eval_fraction;
    std::string in_d;
    std::string in_d_test;
    std::string ood;
    std::string spam_train;
    std::string output_dir;
    std::string prompt_template;
    std::vector<std::string> criteria;
    std::vector<std::string> report_formats;
    std::optional<long long> max_bytes;
    std::optional<int> max_concurrency;
    bool include_timing = false;
    bool dry_run_only = false;
};

void add_eval_flags(CLI::App& cmd, EvalFlags& flags) {
    cmd.add_option("-c,--config", flags.config_path,
                   "experiment config file (JSON)")
        ->required();
    cmd.add_option("--seed", flags.seed, "override the split seed");
    cmd.add_option("--eval-fraction", flags.eval_fraction,
                   "override the in-distribution eval fraction");
    cmd.add_option("--in-d", flags.in_d, "override datasets.in_d path");
    cmd.add_option("--in-d-test", flags.in_d_test,
                   "override datasets.in_d_test path");
    cmd.add_option("--ood", flags.ood, "override datasets.ood path");
    cmd.add_option("--spam-train", flags.spam_train,
                   "override datasets.spam_train path");
    cmd.add_option("--output-dir", flags.output_dir,
                   "override the output directory");
    cmd.add_option("--prompt-template", flags.prompt_template,
                   "override the question prompt template");
    cmd.add_option("--criterion", flags.criteria,
                   "override the criteria list (repeatable)");
    cmd.add_option("--report-format", flags.report_formats,
                   "override report formats: json|csv|markdown (repeatable)");
    cmd.add_option("--max-bytes", flags.max_bytes,
                   "override pre-scoring truncation (bytes)");
    cmd.add_option("--max-concurrency", flags.max_concurrency,
                   "override the scoring pool width");
    cmd.add_flag("--include-timing", flags.include_timing,
                 "include wall time in reports (makes them non-reproducible)");
    cmd.add_flag("--dry-run", flags.dry_run_only,
                 "validate config and backend reachability, then stop");
}

ExperimentConfig resolve_config(const EvalFlags& flags) {
    ExperimentConfig config = load_experiment_config(flags.config_path);
    if (flags.seed) config.seed = *flags.seed;
    if (flags.eval_fraction) {
        if (!(*flags.eval_fraction > 0.0) || !(*flags.eval_fraction < 1.0)) {
            raise(ErrorCode::InvalidFraction,
                  "--eval-fraction must lie strictly between 0 and 1");
        }
        config.eval_fraction = *flags.eval_fraction;
    }
    const auto override_path = [](DatasetSpec& spec, const std::string& path) {
        if (path.empty()) return;
        spec.path = path;
        spec.format.clear();  // re-infer from the new extension
    };
    override_path(config.in_d, flags.in_d);
    override_path(config.in_d_test, flags.in_d_test);
    override_path(config.ood, flags.ood);
    override_path(config.spam_train, flags.spam_train);
    if (!flags.output_dir.empty()) config.output_dir = flags.output_dir;
    if (!flags.prompt_template.empty()) {
        config.prompt_template = flags.prompt_template;
    }
    if (!flags.criteria.empty()) {
        config.criteria = parse_criteria_flags(flags.criteria);
    }
    if (!flags.report_formats.empty()) {
        for (const auto& f : flags.report_formats) parse_report_format(f);
        config.report_formats = flags.report_formats;
    }
    if (flags.max_bytes) {
        if (*flags.max_bytes < 1) {
            raise(ErrorCode::ConfigError, "--max-bytes must be >= 1");
        }
        config.max_bytes = static_cast<std::size_t>(*flags.max_bytes);
    }
    if (flags.max_concurrency) {
        if (*flags.max_concurrency < 1) {
            raise(ErrorCode::ConfigError, "--max-concurrency must be >= 1");
        }
        config.max_concurrency = *flags.max_concurrency;
    }
    if (flags.include_timing) config.include_timing = true;
    return config;
}

void run_eval_shape(const EvalFlags& flags,
                    std::initializer_list<ExperimentMode> allowed,
                    const char* hint) {
    const ExperimentConfig config = resolve_config(flags);
    if (std::find(allowed.begin(), allowed.end(), config.mode) == allowed.end()) {
        raise(ErrorCode::ConfigError,
              std::string("config mode \"") + to_string(config.mode) +
                  "\" does not fit this subcommand; " + hint);
    }
    if (flags.dry_run_only) {
        std::cout << dry_run(config);
        return;
    }
    RunReport report;
    switch (config.mode) {
        case ExperimentMode::FarOrNearOOD:
        case ExperimentMode::Spam:
            report = run_ood(config);
            break;
        case ExperimentMode::SpamDualProxy:
            report = run_spam_dual_proxy(config);
            break;
        case ExperimentMode::QA:
            report = run_qa(config);
            break;
    }
    std::cout << "score file: " << report.score_file << "\n";
    for (const auto& name : config.report_formats) {
        const std::string path =
            emit_report(report, parse_report_format(name), config.output_dir);
        std::cout << "report: " << path << "\n";
    }
    std::cout << "\n" << render_report(report, ReportFormat::Markdown);
}

void run_train(const TrainFlags& flags) {
    // Role only gates label validation; a generic training corpus may carry
    // any labels, so load under the unconstrained role.
    const Dataset corpus = load_dataset({flags.corpus, flags.format},
                                        DatasetRole::OOD_Test, "--corpus");
    const NGramModel model = train(corpus, flags.order, flags.k);
    save_model(model, flags.out);
    std::cout << "trained order-" << model.order() << " model on "
              << corpus.records.size() << " records (" << model.context_count()
              << " contexts); wrote " << flags.out << "\n";
}

void run_adapt(const AdaptFlags& flags) {
    const NGramModel base = load_model(flags.base);
    const Dataset corpus = load_dataset({flags.corpus, flags.format},
                                        DatasetRole::OOD_Test, "--corpus");
    const NGramModel finetuned = adapt(base, corpus, flags.alpha);
    save_model(finetuned, flags.out);
    std::cout << "adapted order-" << finetuned.order() << " model (alpha "
              << flags.alpha << ") on " << corpus.records.size()
              << " records (" << finetuned.context_count()
              << " contexts); wrote " << flags.out << "\n";
}

void run_score(const ScoreFlags& flags) {
    ExperimentConfig config;
    if (!flags.config_path.empty()) {
        if (!flags.base_model.empty() || !flags.finetuned_model.empty()) {
            raise(ErrorCode::ConfigError,
                  "--config and --base-model/--finetuned-model are exclusive");
        }
        config = load_experiment_config(flags.config_path);
    } else {
        if (flags.base_model.empty() || flags.finetuned_model.empty()) {
            raise(ErrorCode::ConfigError,
                  "score needs --config or both --base-model and "
                  "--finetuned-model");
        }
        NgramPairSpec spec;
        spec.base_model = flags.base_model;
        spec.finetuned_model = flags.finetuned_model;
        config.ngram = spec;
    }
    if (flags.max_bytes) {
        if (*flags.max_bytes < 1) {
            raise(ErrorCode::ConfigError, "--max-bytes must be >= 1");
        }
        config.max_bytes = static_cast<std::size_t>(*flags.max_bytes);
    }
    if (flags.max_concurrency) {
        if (*flags.max_concurrency < 1) {
            raise(ErrorCode::ConfigError, "--max-concurrency must be >= 1");
        }
        config.max_concurrency = *flags.max_concurrency;
    }
    const std::vector<CriterionKind> criteria =
        flags.criteria.empty()
            ? std::vector<CriterionKind>{{CriterionTag::LR, false}}
            : parse_criteria_flags(flags.criteria);
    const Dataset data = load_dataset({flags.input, flags.format},
                                      DatasetRole::OOD_Test, "--input");
    const std::vector<ScoreRow> rows = score_records(config, data, criteria);
    save_score_file(rows, flags.out);
    std::cout << "wrote " << rows.size() << " score rows to " << flags.out
              << "\n";
}

void run_report(const ReportFlags& flags) {
    std::ifstream in(flags.input, std::ios::binary);
    if (!in) {
        raise(ErrorCode::Io, "cannot open report file " + flags.input);
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        raise(ErrorCode::Io, flags.input + ": not valid JSON: " + e.what());
    }
    const RunReport report = report_from_json(doc);
    const std::string text =
        render_report(report, parse_report_format(flags.format));
    if (flags.out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(flags.out, std::ios::binary | std::ios::trunc);
    if (!out) {
        raise(ErrorCode::Io, "cannot open " + flags.out + " for writing");
    }
    out << text;
    std::cout << "wrote " << flags.out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Out-of-distribution text detection via base/finetuned likelihood "
        "ratios"};
    app.require_subcommand(1);

    TrainFlags train_flags;
    auto* train_cmd =
        app.add_subcommand("train", "train a base n-gram model on a corpus");
    train_cmd->add_option("--corpus", train_flags.corpus, "training corpus")
        ->required();
    train_cmd->add_option("--format", train_flags.format,
                          "corpus format: jsonl|csv|lines (default: by extension)");
    train_cmd->add_option("--order", train_flags.order, "n-gram order (>= 1)");
    train_cmd->add_option("--k", train_flags.k, "additive smoothing constant (> 0)");
    train_cmd->add_option("--out", train_flags.out, "output model file")
        ->required();
    train_cmd->callback([&] { run_train(train_flags); });

    AdaptFlags adapt_flags;
    auto* adapt_cmd = app.add_subcommand(
        "adapt", "blend a base model with an in-distribution corpus");
    adapt_cmd->add_option("--base", adapt_flags.base, "base model file")
        ->required();
    adapt_cmd->add_option("--corpus", adapt_flags.corpus, "adaptation corpus")
        ->required();
    adapt_cmd->add_option("--format", adapt_flags.format,
                          "corpus format: jsonl|csv|lines (default: by extension)");
    adapt_cmd->add_option("--alpha", adapt_flags.alpha,
                          "weight of the base model's smoothed conditionals");
    adapt_cmd->add_option("--out", adapt_flags.out, "output model file")
        ->required();
    adapt_cmd->callback([&] { run_adapt(adapt_flags); });

    ScoreFlags score_flags;
    auto* score_cmd = app.add_subcommand(
        "score", "score records under a model pair and write a score file");
    score_cmd->add_option("-c,--config", score_flags.config_path,
                          "experiment config carrying the model pair");
    score_cmd->add_option("--base-model", score_flags.base_model,
                          "base n-gram model file");
    score_cmd->add_option("--finetuned-model", score_flags.finetuned_model,
                          "finetuned n-gram model file");
    score_cmd->add_option("--input", score_flags.input, "dataset to score")
        ->required();
    score_cmd->add_option("--format", score_flags.format,
                          "input format: jsonl|csv|lines (default: by extension)");
    score_cmd->add_option("--out", score_flags.out,
                          "output score file (default scores.jsonl)");
    score_cmd->add_option("--criterion", score_flags.criteria,
                          "criteria to compute (default: lr; repeatable)");
    score_cmd->add_option("--max-bytes", score_flags.max_bytes,
                          "truncate texts to this many bytes before scoring");
    score_cmd->add_option("--max-concurrency", score_flags.max_concurrency,
                          "scoring pool width");
    score_cmd->callback([&] { run_score(score_flags); });

    EvalFlags eval_flags;
    auto* eval_cmd = app.add_subcommand(
        "eval", "run the far/near-OOD or spam detection experiment");
    add_eval_flags(*eval_cmd, eval_flags);
    eval_cmd->callback([&] {
        run_eval_shape(eval_flags,
                       {ExperimentMode::FarOrNearOOD, ExperimentMode::Spam},
                       "use qa-eval or spam-eval for qa/spam_dual_proxy configs");
    });

    EvalFlags qa_flags;
    auto* qa_cmd = app.add_subcommand(
        "qa-eval", "run the question-answering detection experiment");
    add_eval_flags(*qa_cmd, qa_flags);
    qa_cmd->callback([&] {
        run_eval_shape(qa_flags, {ExperimentMode::QA},
                       "qa-eval needs mode \"qa\"");
    });

    EvalFlags spam_flags;
    auto* spam_cmd = app.add_subcommand(
        "spam-eval", "run the dual-proxy spam detection experiment");
    add_eval_flags(*spam_cmd, spam_flags);
    spam_cmd->callback([&] {
        run_eval_shape(spam_flags, {ExperimentMode::SpamDualProxy},
                       "spam-eval needs mode \"spam_dual_proxy\"");
    });

    ReportFlags report_flags;
    auto* report_cmd = app.add_subcommand(
        "report", "re-render a JSON run report in another format");
    report_cmd->add_option("--input", report_flags.input, "report.json path")
        ->required();
    report_cmd->add_option("--format", report_flags.format,
                           "output format: json|csv|markdown");
    report_cmd->add_option("--out", report_flags.out,
                           "output file (default: stdout)");
    report_cmd->callback([&] { run_report(report_flags); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;  // all command-line problems are config errors
    } catch (const oodratio::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_class();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
