#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "oodratio/records.hpp"

namespace oodratio {

// Canonical dataset format: one JSON object per line with fields
//   id (optional), text, question (optional), answer (optional),
//   label ("in"|"ood", optional).
// Missing ids are synthesized as "<filename>:<line_number>".
Dataset load_jsonl(const std::string& path, DatasetRole role);

void save_jsonl(const Dataset& dataset, const std::string& path);

// Thin adapters over the canonical loader. Both synthesize ids.
// CSV: first line is a header naming at least a "text" or "question" column.
Dataset load_csv(const std::string& path, DatasetRole role);
// Plain text: one record per line, the whole line is the text.
Dataset load_lines(const std::string& path, DatasetRole role,
                   Label label = Label::Unlabeled);

// Deterministic partition: eval part gets floor(n * eval_fraction) records,
// the train part the rest. Returns (train, eval).
std::pair<Dataset, Dataset> split(const Dataset& dataset, double eval_fraction,
                                  std::uint64_t seed);

// Score-file rows: one JSON object per line {id, criterion, score, label}.
struct ScoreRow {
    std::string id;
    std::string criterion;
    double score = 0.0;
    Label label = Label::Unlabeled;
};

void save_score_file(const std::vector<ScoreRow>& rows, const std::string& path);
std::vector<ScoreRow> load_score_file(const std::string& path);

}  // namespace oodratio
