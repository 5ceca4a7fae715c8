#pragma once

// Dataset manifest: UTF-8 text,
//
//   #classes: circle,square,triangle
//   #split: train                  (optional; train, val or test)
//   images/0001.ppm<TAB>0
//   ...
//
// Paths are relative to the manifest's directory. Blank lines and other
// `#` lines are ignored.

#include <string>
#include <vector>

namespace rcnds::io {

enum class Split { kTrain, kVal, kTest };

const char* to_string(Split s);

struct ManifestEntry {
  std::string path;  // relative to root
  int label = 0;

  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::string root;
  std::vector<ManifestEntry> entries;
  std::vector<std::string> class_names;
  Split split = Split::kTrain;

  std::string full_path(const ManifestEntry& e) const;
};

struct ManifestOptions {
  bool check_files = true;
};

/// Throws ManifestError with the offending line on a missing image file,
/// an out-of-range class index, a duplicate path or a malformed line.
DatasetManifest load_manifest(const std::string& path, const ManifestOptions& options = {});
DatasetManifest parse_manifest(const std::string& text, const std::string& root, const ManifestOptions& options = {});

std::string format_manifest(const DatasetManifest& m);
void write_manifest(const DatasetManifest& m, const std::string& path);

}  // namespace rcnds::io
