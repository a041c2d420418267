#include "wmaudit/corpus.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace wmaudit {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << contents;
}

namespace {

std::vector<std::string> lines_of(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(std::move(line));
  }
  return out;
}

bool is_jsonl(const std::filesystem::path& path) { return path.extension() == ".jsonl"; }

}  // namespace

std::vector<std::string> read_documents(const std::filesystem::path& path) {
  auto lines = lines_of(path);
  if (!is_jsonl(path)) return lines;
  std::vector<std::string> docs;
  docs.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      docs.push_back(nlohmann::json::parse(lines[i]).at("text").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return docs;
}

std::vector<LabeledText> read_dataset(const std::filesystem::path& path) {
  std::vector<LabeledText> rows;
  const auto lines = lines_of(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      const auto j = nlohmann::json::parse(lines[i]);
      const int label = j.at("label").get<int>();
      if (label != 0 && label != 1) throw std::runtime_error("label must be 0 or 1");
      rows.push_back({j.at("text").get<std::string>(), label == 1 ? Label::member : Label::nonmember});
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return rows;
}

void write_documents_jsonl(const std::filesystem::path& path, const std::vector<std::string>& docs) {
  std::string out;
  for (const auto& d : docs) out += nlohmann::json{{"text", d}}.dump() + "\n";
  write_file(path, out);
}

void write_dataset_jsonl(const std::filesystem::path& path, const std::vector<LabeledText>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += nlohmann::json{{"text", r.text}, {"label", r.label == Label::member ? 1 : 0}}.dump() + "\n";
  }
  write_file(path, out);
}

std::vector<LabeledSample> encode_dataset(const Vocabulary& vocab, const std::vector<LabeledText>& rows) {
  std::vector<LabeledSample> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back({vocab.encode(r.text), r.label});
  return out;
}

}  // namespace wmaudit
