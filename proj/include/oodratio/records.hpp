#pragma once

#include <optional>
#include <string>
#include <vector>

namespace oodratio {

enum class Label { InDistribution, OutOfDistribution, Unlabeled };

// "in"/"ood" (case-insensitive); anything else maps to Unlabeled.
Label parse_label(const std::string& s);
const char* to_string(Label label) noexcept;

// One dataset item. Plain records carry text only; QA records carry a
// question (and optionally an answer) and no text.
struct TextRecord {
    std::string id;
    std::string text;
    std::optional<std::string> question;
    std::optional<std::string> answer;
    Label label = Label::Unlabeled;

    bool is_qa() const noexcept { return question.has_value() && !question->empty(); }

    // The bytes used when this record feeds model training.
    std::string training_text() const;
};

enum class DatasetRole { InD_Train, InD_Test, OOD_Test };

const char* to_string(DatasetRole role) noexcept;

struct Dataset {
    std::vector<TextRecord> records;
    std::string name;
    DatasetRole role = DatasetRole::InD_Train;

    bool empty() const noexcept { return records.empty(); }
    std::size_t size() const noexcept { return records.size(); }

    Dataset with_role(DatasetRole r) const {
        Dataset d = *this;
        d.role = r;
        return d;
    }
};

// Throws DataInvariant on violations (duplicate ids, OOD labels inside
// an InD_Train dataset, records with both text and question).
void validate(const Dataset& dataset);

}  // namespace oodratio
