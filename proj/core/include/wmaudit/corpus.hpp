#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "wmaudit/mia.hpp"

namespace wmaudit {

/// Documents from a UTF-8 file: `.jsonl` files take the "text" field of
/// every line, anything else is one document per non-empty line.
std::vector<std::string> read_documents(const std::filesystem::path& path);

struct LabeledText {
  std::string text;
  Label label = Label::nonmember;
};

/// JSONL with {"text": str, "label": 0|1}; 1 marks a training member.
std::vector<LabeledText> read_dataset(const std::filesystem::path& path);

void write_documents_jsonl(const std::filesystem::path& path, const std::vector<std::string>& docs);
void write_dataset_jsonl(const std::filesystem::path& path, const std::vector<LabeledText>& rows);

std::vector<LabeledSample> encode_dataset(const Vocabulary& vocab, const std::vector<LabeledText>& rows);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace wmaudit
