#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "oodratio/criteria.hpp"
#include "oodratio/data_io.hpp"
#include "oodratio/metrics.hpp"
#include "oodratio/remote_scorer.hpp"

namespace oodratio {

enum class ExperimentMode { FarOrNearOOD, Spam, SpamDualProxy, QA };

const char* to_string(ExperimentMode mode) noexcept;
ExperimentMode parse_mode(const std::string& name);

// n-gram model pair: either corpora to train/adapt from, or previously
// saved model files. base_corpus/base_model resolve the base model;
// in_d_corpus defaults to the in-distribution train split.
struct NgramPairSpec {
    int order = 3;
    double k = 1.0;
    double alpha = 5.0;
    std::string base_corpus;
    std::string in_d_corpus;
    std::string base_model;
    std::string finetuned_model;
};

struct RemotePairSpec {
    BackendConfig base;
    BackendConfig finetuned;
};

struct DatasetSpec {
    std::string path;
    std::string format;  // "jsonl" | "csv" | "lines"; empty = by extension

    bool empty() const noexcept { return path.empty(); }
};

struct ExperimentConfig {
    ExperimentMode mode = ExperimentMode::FarOrNearOOD;
    DatasetSpec in_d;        // split by eval_fraction unless in_d_test is given
    DatasetSpec in_d_test;
    DatasetSpec ood;
    DatasetSpec spam_train;  // dual-proxy mode only
    std::optional<NgramPairSpec> ngram;
    std::optional<RemotePairSpec> remote;
    std::vector<CriterionKind> criteria;  // empty = per-mode default
    GenerationConfig generation;
    std::string prompt_template = "{question}";
    std::uint64_t seed = 1;
    double eval_fraction = 0.2;
    std::optional<std::size_t> max_bytes;  // truncate texts before scoring
    std::string output_dir = "out";
    std::vector<std::string> report_formats = {"json", "markdown"};
    bool include_timing = false;  // timing makes reports non-reproducible
    int max_concurrency = 4;      // n-gram scoring pool width
};

ExperimentConfig parse_experiment_config(const nlohmann::json& doc,
                                         const std::string& origin);
ExperimentConfig load_experiment_config(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& config);

// Loads a dataset by explicit format, or by file extension when the entry
// leaves the format empty (.jsonl/.ndjson/.json, .csv, anything else =
// one record per line). `what` names the dataset in error messages.
Dataset load_dataset(const DatasetSpec& spec, DatasetRole role,
                     const std::string& what);

// Scores every record of `data` under the configured model pair and the
// given flat criteria (QA criteria need run_qa). Labels are taken from the
// records; rows come out criterion-major, record order within a criterion.
std::vector<ScoreRow> score_records(const ExperimentConfig& config,
                                    const Dataset& data,
                                    const std::vector<CriterionKind>& criteria);

struct RunReport {
    nlohmann::json config_echo;
    std::string backend;
    std::vector<MetricsReport> metrics;  // one per requested criterion, in order
    std::string score_file;
    std::size_t n_in_test = 0;
    std::size_t n_ood_test = 0;
    long long dropped_positions = 0;
    long long retries_used = 0;
    std::vector<std::string> excluded;  // "record-id: reason"
    bool qa_mode = false;
    GenerationConfig generation_used;  // meaningful when qa_mode
    bool include_timing = false;
    double wall_seconds = 0.0;  // serialized only when include_timing
};

// The four experiment shapes. Each validates the config, audits criterion
// orientation, scores the eval sets, writes the score file, and computes
// per-criterion metrics.
RunReport run_ood(const ExperimentConfig& config);             // modes ood|spam
RunReport run_spam_dual_proxy(const ExperimentConfig& config); // mode spam_dual_proxy
RunReport run_qa(const ExperimentConfig& config);              // mode qa

enum class ReportFormat { Json, Csv, Markdown };

ReportFormat parse_report_format(const std::string& name);

nlohmann::json report_to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& doc);
std::string render_report(const RunReport& report, ReportFormat format);

// Writes report.{json,csv,md} under dir; returns the file path.
std::string emit_report(const RunReport& report, ReportFormat format,
                        const std::string& dir);

// Smoke check run before every experiment: each requested criterion must
// reach AUROC >= 0.5 on a small built-in separable task, proving the
// larger-means-more-OOD orientation before real scoring starts.
void audit_orientation(const std::vector<CriterionKind>& criteria);

// Config + backend-reachability validation without scoring anything.
// Returns a human-readable summary of what a real run would do.
std::string dry_run(const ExperimentConfig& config);

}  // namespace oodratio
