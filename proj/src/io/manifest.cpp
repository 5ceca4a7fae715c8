#include "rcnds/io/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "rcnds/core/error.hpp"

namespace rcnds::io {
namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace

const char* to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

std::string DatasetManifest::full_path(const ManifestEntry& e) const {
  return root.empty() ? e.path : (fs::path(root) / e.path).string();
}

DatasetManifest parse_manifest(const std::string& text, const std::string& root, const ManifestOptions& options) {
  DatasetManifest m;
  m.root = root;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool have_classes = false;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (line[0] == '#') {
      const std::string body = trim(line.substr(1));
      if (body.rfind("classes:", 0) == 0) {
        if (have_classes) throw ManifestError(line_no, "second #classes header");
        std::istringstream names(body.substr(8));
        std::string name;
        while (std::getline(names, name, ',')) {
          name = trim(name);
          if (name.empty()) throw ManifestError(line_no, "empty class name");
          m.class_names.push_back(name);
        }
        if (m.class_names.empty()) throw ManifestError(line_no, "#classes header lists no classes");
        have_classes = true;
      } else if (body.rfind("split:", 0) == 0) {
        const std::string s = trim(body.substr(6));
        if (s == "train") m.split = Split::kTrain;
        else if (s == "val") m.split = Split::kVal;
        else if (s == "test") m.split = Split::kTest;
        else throw ManifestError(line_no, "unknown split '" + s + "'");
      }
      continue;
    }
    if (!have_classes) throw ManifestError(line_no, "entry before the #classes header");
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw ManifestError(line_no, "expected <path><TAB><class index>");
    }
    ManifestEntry e{line.substr(0, tab), 0};
    const std::string idx = trim(line.substr(tab + 1));
    std::size_t used = 0;
    try {
      e.label = std::stoi(idx, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (e.path.empty() || used == 0 || used != idx.size()) throw ManifestError(line_no, "malformed entry");
    if (e.label < 0 || e.label >= static_cast<int>(m.class_names.size())) {
      throw ManifestError(line_no, "class index " + std::to_string(e.label) + " outside [0, " +
                                       std::to_string(m.class_names.size()) + ")");
    }
    if (!seen.insert(e.path).second) throw ManifestError(line_no, "duplicate path '" + e.path + "'");
    if (options.check_files && !fs::is_regular_file(m.full_path(e))) {
      throw ManifestError(line_no, "missing image file '" + m.full_path(e) + "'");
    }
    m.entries.push_back(std::move(e));
  }
  if (!have_classes) throw ManifestError(line_no == 0 ? 1 : line_no, "missing #classes header");
  return m;
}

DatasetManifest load_manifest(const std::string& path, const ManifestOptions& options) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open manifest '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), fs::path(path).parent_path().string(), options);
}

std::string format_manifest(const DatasetManifest& m) {
  std::ostringstream os;
  os << "#classes: ";
  for (std::size_t i = 0; i < m.class_names.size(); ++i) os << (i ? "," : "") << m.class_names[i];
  os << "\n#split: " << to_string(m.split) << '\n';
  for (const ManifestEntry& e : m.entries) os << e.path << '\t' << e.label << '\n';
  return os.str();
}

void write_manifest(const DatasetManifest& m, const std::string& path) {
  std::ofstream out(path);
  out << format_manifest(m);
  if (!out) throw InputError("cannot write manifest '" + path + "'");
}

}  // namespace rcnds::io
