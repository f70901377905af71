#include "ccan/manifest.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "ccan/error.hpp"

namespace ccan {
namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

int parse_int(std::string_view field, const char* what, std::size_t line_no) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
    throw ConfigError("manifest line " + std::to_string(line_no) + ": bad " + what + " '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace

std::string_view to_string(Split split) noexcept {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kQuery:
      return "query";
    case Split::kGallery:
      return "gallery";
  }
  return "train";
}

Split split_from_string(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "query") return Split::kQuery;
  if (text == "gallery") return Split::kGallery;
  throw ConfigError("unknown split '" + std::string(text) + "' (expected train, query or gallery)");
}

std::vector<SampleRecord> Manifest::select(Split split) const {
  std::vector<SampleRecord> out;
  for (const auto& r : records) {
    if (r.split == split) out.push_back(r);
  }
  return out;
}

std::vector<SampleRecord> parse_manifest(std::string_view text) {
  std::vector<SampleRecord> records;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;

    const auto f = split_tabs(line);
    if (f.size() != 5) {
      throw ConfigError("manifest line " + std::to_string(line_no) + ": expected 5 tab-separated fields, found " +
                        std::to_string(f.size()));
    }
    SampleRecord r;
    if (f[0].empty()) throw ConfigError("manifest line " + std::to_string(line_no) + ": empty path");
    r.path = std::string(f[0]);
    r.person_id = parse_int(f[1], "person_id", line_no);
    r.camera_id = parse_int(f[2], "camera_id", line_no);
    try {
      r.split = split_from_string(f[3]);
    } catch (const ConfigError& e) {
      throw ConfigError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    const int junk = parse_int(f[4], "junk flag", line_no);
    if (junk != 0 && junk != 1) throw ConfigError("manifest line " + std::to_string(line_no) + ": junk must be 0 or 1");
    r.junk = junk == 1;
    if (r.person_id < -1) throw ConfigError("manifest line " + std::to_string(line_no) + ": person_id below -1");
    if (r.person_id == -1 && !r.junk) {
      throw ConfigError("manifest line " + std::to_string(line_no) + ": person_id -1 requires junk = 1");
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::string format_manifest(const std::vector<SampleRecord>& records) {
  std::ostringstream out;
  for (const auto& r : records) {
    out << r.path << '\t' << r.person_id << '\t' << r.camera_id << '\t' << to_string(r.split) << '\t'
        << (r.junk ? 1 : 0) << '\n';
  }
  return out.str();
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  Manifest m;
  m.records = parse_manifest(buffer.str());
  m.root = path.parent_path();
  return m;
}

void save_manifest(const std::filesystem::path& path, const std::vector<SampleRecord>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << format_manifest(records);
}

}  // namespace ccan
