#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ccan {

enum class Split { kTrain, kQuery, kGallery };

std::string_view to_string(Split split) noexcept;
Split split_from_string(std::string_view text);

// One line of a manifest: path<TAB>person_id<TAB>camera_id<TAB>split<TAB>junk.
// person_id -1 marks a distractor and requires junk = 1.
struct SampleRecord {
  std::string path;  // relative to the manifest's directory
  int person_id = 0;
  int camera_id = 0;
  Split split = Split::kTrain;
  bool junk = false;

  bool operator==(const SampleRecord&) const = default;
};

struct Manifest {
  std::vector<SampleRecord> records;
  std::filesystem::path root;  // directory record paths resolve against

  std::filesystem::path resolve(const SampleRecord& r) const { return root / r.path; }
  std::vector<SampleRecord> select(Split split) const;
};

// Blank lines and lines starting with '#' are ignored. Errors name the line.
std::vector<SampleRecord> parse_manifest(std::string_view text);
// Canonical form: one record per line, junk written as 0/1, trailing newline.
std::string format_manifest(const std::vector<SampleRecord>& records);

Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const std::vector<SampleRecord>& records);

}  // namespace ccan
