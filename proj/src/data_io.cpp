#include "oodratio/data_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "oodratio/error.hpp"

namespace oodratio {

using nlohmann::json;

namespace {

std::string basename_of(const std::string& path) {
    const auto pos = path.find_last_of("/\\");
    return pos == std::string::npos ? path : path.substr(pos + 1);
}

bool blank(const std::string& line) {
    return std::all_of(line.begin(), line.end(),
                       [](unsigned char c) { return std::isspace(c); });
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

void check_duplicate_ids(const std::vector<TextRecord>& records) {
    std::unordered_set<std::string> seen;
    seen.reserve(records.size());
    for (const auto& r : records) {
        if (!seen.insert(r.id).second) {
            raise(ErrorCode::DuplicateId, "duplicate record id \"" + r.id + "\"");
        }
    }
}

// Structural rule shared by all loaders: a record carries either text or a
// question, never both, never neither.
void check_shape(const TextRecord& r, const std::string& where) {
    const bool has_text = !r.text.empty();
    const bool has_question = r.question.has_value() && !r.question->empty();
    if (has_text == has_question) {
        raise(ErrorCode::MalformedLine,
              where + ": record must have exactly one of nonempty \"text\" or "
                      "nonempty \"question\"");
    }
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        raise(ErrorCode::Io, "cannot open " + path + " for reading");
    }
    return in;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        raise(ErrorCode::Io, "cannot open " + path + " for writing");
    }
    return out;
}

}  // namespace

Label parse_label(const std::string& s) {
    const std::string l = lower(s);
    if (l == "in") return Label::InDistribution;
    if (l == "ood") return Label::OutOfDistribution;
    if (!l.empty() && l != "unlabeled") {
        std::cerr << "[oodratio] warning: unknown label \"" << s
                  << "\" treated as unlabeled\n";
    }
    return Label::Unlabeled;
}

const char* to_string(Label label) noexcept {
    switch (label) {
        case Label::InDistribution: return "in";
        case Label::OutOfDistribution: return "ood";
        case Label::Unlabeled: return "unlabeled";
    }
    return "unlabeled";
}

const char* to_string(DatasetRole role) noexcept {
    switch (role) {
        case DatasetRole::InD_Train: return "in_d_train";
        case DatasetRole::InD_Test: return "in_d_test";
        case DatasetRole::OOD_Test: return "ood_test";
    }
    return "in_d_train";
}

std::string TextRecord::training_text() const {
    if (!text.empty()) return text;
    std::string t = question.value_or("");
    if (answer && !answer->empty()) t += *answer;
    return t;
}

void validate(const Dataset& dataset) {
    check_duplicate_ids(dataset.records);
    for (const auto& r : dataset.records) {
        check_shape(r, dataset.name + ":" + r.id);
        if (dataset.role == DatasetRole::InD_Train &&
            r.label == Label::OutOfDistribution) {
            raise(ErrorCode::DataInvariant,
                  "in-distribution training set \"" + dataset.name +
                      "\" contains an OOD-labeled record: " + r.id);
        }
    }
}

Dataset load_jsonl(const std::string& path, DatasetRole role) {
    auto in = open_input(path);
    const std::string fname = basename_of(path);

    Dataset ds;
    ds.name = fname;
    ds.role = role;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;

        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error&) {
            raise(ErrorCode::MalformedLine,
                  path + ":" + std::to_string(line_no) + ": not valid JSON");
        }
        if (!obj.is_object()) {
            raise(ErrorCode::MalformedLine,
                  path + ":" + std::to_string(line_no) + ": line is not a JSON object");
        }

        TextRecord r;
        r.id = obj.value("id", fname + ":" + std::to_string(line_no));
        r.text = obj.value("text", "");
        if (obj.contains("question") && obj["question"].is_string()) {
            r.question = obj["question"].get<std::string>();
        }
        if (obj.contains("answer") && obj["answer"].is_string()) {
            r.answer = obj["answer"].get<std::string>();
        }
        if (obj.contains("label") && obj["label"].is_string()) {
            r.label = parse_label(obj["label"].get<std::string>());
        }
        check_shape(r, path + ":" + std::to_string(line_no));
        ds.records.push_back(std::move(r));
    }

    if (ds.records.empty()) {
        std::cerr << "[oodratio] warning: " << path << " holds no records\n";
    }
    validate(ds);
    return ds;
}

void save_jsonl(const Dataset& dataset, const std::string& path) {
    auto out = open_output(path);
    for (const auto& r : dataset.records) {
        json obj;
        obj["id"] = r.id;
        if (!r.text.empty()) obj["text"] = r.text;
        if (r.question) obj["question"] = *r.question;
        if (r.answer) obj["answer"] = *r.answer;
        if (r.label != Label::Unlabeled) obj["label"] = to_string(r.label);
        out << obj.dump() << '\n';
    }
}

namespace {

// Minimal RFC 4180 row reader: quoted fields may contain commas, doubled
// quotes, and newlines.
bool read_csv_row(std::istream& in, std::vector<std::string>& fields) {
    fields.clear();
    std::string field;
    bool in_quotes = false;
    bool any = false;
    int c;
    while ((c = in.get()) != EOF) {
        any = true;
        const char ch = static_cast<char>(c);
        if (in_quotes) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    field += '"';
                    in.get();
                } else {
                    in_quotes = false;
                }
            } else {
                field += ch;
            }
        } else if (ch == '"') {
            in_quotes = true;
        } else if (ch == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (ch == '\n') {
            break;
        } else if (ch != '\r') {
            field += ch;
        }
    }
    if (!any) return false;
    fields.push_back(std::move(field));
    return true;
}

}  // namespace

Dataset load_csv(const std::string& path, DatasetRole role) {
    auto in = open_input(path);
    const std::string fname = basename_of(path);

    Dataset ds;
    ds.name = fname;
    ds.role = role;

    std::vector<std::string> header;
    if (!read_csv_row(in, header)) {
        std::cerr << "[oodratio] warning: " << path << " holds no records\n";
        return ds;
    }
    auto column = [&](const std::string& name) -> int {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (lower(header[i]) == name) return static_cast<int>(i);
        }
        return -1;
    };
    const int id_col = column("id");
    const int text_col = column("text");
    const int question_col = column("question");
    const int answer_col = column("answer");
    const int label_col = column("label");
    if (text_col < 0 && question_col < 0) {
        raise(ErrorCode::MalformedLine,
              path + ": header names neither a \"text\" nor a \"question\" column");
    }

    std::vector<std::string> row;
    std::size_t line_no = 1;
    auto cell = [&](int col) -> std::string {
        return (col >= 0 && static_cast<std::size_t>(col) < row.size())
                   ? row[static_cast<std::size_t>(col)]
                   : std::string();
    };
    while (read_csv_row(in, row)) {
        ++line_no;
        if (row.size() == 1 && row[0].empty()) continue;
        TextRecord r;
        const std::string id = cell(id_col);
        r.id = id.empty() ? fname + ":" + std::to_string(line_no) : id;
        r.text = cell(text_col);
        if (const std::string q = cell(question_col); !q.empty()) r.question = q;
        if (const std::string a = cell(answer_col); !a.empty()) r.answer = a;
        if (const std::string l = cell(label_col); !l.empty()) r.label = parse_label(l);
        check_shape(r, path + ":" + std::to_string(line_no));
        ds.records.push_back(std::move(r));
    }
    validate(ds);
    return ds;
}

Dataset load_lines(const std::string& path, DatasetRole role, Label label) {
    auto in = open_input(path);
    const std::string fname = basename_of(path);

    Dataset ds;
    ds.name = fname;
    ds.role = role;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        TextRecord r;
        r.id = fname + ":" + std::to_string(line_no);
        r.text = line;
        r.label = label;
        ds.records.push_back(std::move(r));
    }
    if (ds.records.empty()) {
        std::cerr << "[oodratio] warning: " << path << " holds no records\n";
    }
    validate(ds);
    return ds;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double eval_fraction,
                                  std::uint64_t seed) {
    if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) {
        raise(ErrorCode::InvalidFraction,
              "eval_fraction must lie in (0,1), got " + std::to_string(eval_fraction));
    }
    if (dataset.empty()) {
        raise(ErrorCode::DataInvariant, "cannot split an empty dataset");
    }

    const std::size_t n = dataset.size();
    const auto eval_n =
        static_cast<std::size_t>(std::floor(static_cast<double>(n) * eval_fraction));

    // Hand-rolled Fisher-Yates: std::shuffle's draw sequence is
    // implementation-defined, and split results must be stable.
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::mt19937_64 rng(seed);
    for (std::size_t i = n - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
        std::swap(idx[i], idx[j]);
    }

    std::vector<std::size_t> eval_idx(idx.begin(), idx.begin() + static_cast<long>(eval_n));
    std::vector<std::size_t> train_idx(idx.begin() + static_cast<long>(eval_n), idx.end());
    std::sort(eval_idx.begin(), eval_idx.end());
    std::sort(train_idx.begin(), train_idx.end());

    Dataset train, eval;
    train.name = dataset.name + "/train";
    train.role = dataset.role;
    eval.name = dataset.name + "/eval";
    eval.role = dataset.role;
    train.records.reserve(train_idx.size());
    eval.records.reserve(eval_idx.size());
    for (const auto i : train_idx) train.records.push_back(dataset.records[i]);
    for (const auto i : eval_idx) eval.records.push_back(dataset.records[i]);
    return {std::move(train), std::move(eval)};
}

void save_score_file(const std::vector<ScoreRow>& rows, const std::string& path) {
    auto out = open_output(path);
    for (const auto& row : rows) {
        json obj;
        obj["id"] = row.id;
        obj["criterion"] = row.criterion;
        obj["score"] = row.score;
        obj["label"] = to_string(row.label);
        out << obj.dump() << '\n';
    }
}

std::vector<ScoreRow> load_score_file(const std::string& path) {
    auto in = open_input(path);
    std::vector<ScoreRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error&) {
            raise(ErrorCode::MalformedLine,
                  path + ":" + std::to_string(line_no) + ": not valid JSON");
        }
        ScoreRow row;
        try {
            row.id = obj.at("id").get<std::string>();
            row.criterion = obj.at("criterion").get<std::string>();
            row.score = obj.at("score").get<double>();
        } catch (const json::exception& e) {
            raise(ErrorCode::MalformedLine, path + ":" + std::to_string(line_no) +
                                                ": " + e.what());
        }
        row.label = parse_label(obj.value("label", "unlabeled"));
        if (!std::isfinite(row.score)) {
            raise(ErrorCode::NonFiniteScore,
                  path + ":" + std::to_string(line_no) + ": non-finite score");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::Io: return "Io";
        case ErrorCode::MalformedLine: return "MalformedLine";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::InvalidFraction: return "InvalidFraction";
        case ErrorCode::EmptyCorpus: return "EmptyCorpus";
        case ErrorCode::OrderMismatch: return "OrderMismatch";
        case ErrorCode::DataInvariant: return "DataInvariant";
        case ErrorCode::Transport: return "Transport";
        case ErrorCode::ProtocolMismatch: return "ProtocolMismatch";
        case ErrorCode::NonFiniteLogprob: return "NonFiniteLogprob";
        case ErrorCode::BoundaryAmbiguous: return "BoundaryAmbiguous";
        case ErrorCode::EmptyGeneration: return "EmptyGeneration";
        case ErrorCode::TokenizationMismatch: return "TokenizationMismatch";
        case ErrorCode::MissingAnswer: return "MissingAnswer";
        case ErrorCode::EmptyClass: return "EmptyClass";
        case ErrorCode::NonFiniteScore: return "NonFiniteScore";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::MissingSpamCorpus: return "MissingSpamCorpus";
        case ErrorCode::OrientationAudit: return "OrientationAudit";
    }
    return "Unknown";
}

}  // namespace oodratio
