#include "rcnds/graph/dsl.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <vector>

#include "rcnds/core/error.hpp"

namespace rcnds::graph {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

int parse_int(std::string_view v, int line, const std::string& key) {
  int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ParseError(line, "invalid integer '" + std::string(v) + "' for " + key);
  }
  return out;
}

double parse_double(std::string_view v, int line, const std::string& key) {
  const std::string s(v);
  char* end = nullptr;
  const double out = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw ParseError(line, "invalid number '" + s + "' for " + key);
  }
  return out;
}

bool parse_flag(std::string_view v, int line, const std::string& key) {
  if (v == "0") return false;
  if (v == "1") return true;
  throw ParseError(line, key + " must be 0 or 1, got '" + std::string(v) + "'");
}

// key=value attributes of one directive, each consumed at most once.
class Attributes {
 public:
  Attributes(const std::vector<std::string>& tokens, std::size_t first, int line) : line_(line) {
    for (std::size_t i = first; i < tokens.size(); ++i) {
      const auto eq = tokens[i].find('=');
      if (eq == std::string::npos || eq == 0) throw ParseError(line, "expected key=value, got '" + tokens[i] + "'");
      const std::string key = tokens[i].substr(0, eq);
      if (!values_.emplace(key, tokens[i].substr(eq + 1)).second) {
        throw ParseError(line, "repeated key '" + key + "'");
      }
    }
  }

  std::optional<std::string> take(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    std::string v = it->second;
    values_.erase(it);
    return v;
  }
  std::string required(const std::string& key) {
    auto v = take(key);
    if (!v) throw ParseError(line_, "missing " + key + "=");
    return *v;
  }
  int required_int(const std::string& key) { return parse_int(required(key), line_, key); }
  int int_or(const std::string& key, int fallback) {
    auto v = take(key);
    return v ? parse_int(*v, line_, key) : fallback;
  }
  bool flag_or(const std::string& key, bool fallback) {
    auto v = take(key);
    return v ? parse_flag(*v, line_, key) : fallback;
  }
  double double_or(const std::string& key, double fallback) {
    auto v = take(key);
    return v ? parse_double(*v, line_, key) : fallback;
  }
  void finish() const {
    if (!values_.empty()) throw ParseError(line_, "unknown key '" + values_.begin()->first + "'");
  }

 private:
  int line_;
  std::map<std::string, std::string> values_;
};

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = s.find(',', start);
    out.push_back(s.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

// A directive in document order. Branch directives stay unexpanded until
// the class count is known.
struct Declaration {
  int line = 0;
  std::optional<LayerNode> node;
  std::optional<BranchSpec> branch;
};

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ec == std::errc() ? ptr : buf);
}

}  // namespace

GraphSpec parse_arch(std::string_view text) {
  std::vector<Declaration> decls;
  std::optional<CHW> input_shape;
  int input_line = 0;
  std::string output_name;
  int classes = 0;

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    raw = trim(raw);
    if (raw.empty()) continue;

    const std::vector<std::string> tok = split_ws(raw);
    const std::string& kw = tok[0];
    if (kw == "input") {
      if (input_shape) throw ParseError(line_no, "second input directive (first on line " + std::to_string(input_line) + ")");
      if (tok.size() != 4) throw ParseError(line_no, "input expects <c> <h> <w>");
      input_shape = CHW{parse_int(tok[1], line_no, "c"), parse_int(tok[2], line_no, "h"), parse_int(tok[3], line_no, "w")};
      if (input_shape->c < 1 || input_shape->h < 1 || input_shape->w < 1) {
        throw ParseError(line_no, "input dimensions must be positive");
      }
      input_line = line_no;
      LayerNode n;
      n.name = "input";
      n.kind = LayerKind::kInput;
      decls.push_back({line_no, n, std::nullopt});
      continue;
    }
    if (tok.size() < 2) throw ParseError(line_no, "directive '" + kw + "' needs a name");
    if (tok[1].find('=') != std::string::npos) throw ParseError(line_no, "directive '" + kw + "' needs a name before its keys");
    Attributes attrs(tok, 2, line_no);
    LayerNode n;
    n.name = tok[1];

    if (kw == "conv") {
      n.kind = LayerKind::kConv;
      n.inputs = {attrs.required("from")};
      n.out = attrs.required_int("out");
      n.kernel = attrs.required_int("k");
      n.stride = attrs.int_or("s", 1);
      n.pad = attrs.int_or("p", 0);
      n.relu = attrs.flag_or("relu", true);
      n.scale = attrs.flag_or("scale", false);
      if (n.out < 1 || n.kernel < 1 || n.stride < 1 || n.pad < 0) {
        throw ParseError(line_no, "conv '" + n.name + "' needs out, k, s >= 1 and p >= 0");
      }
    } else if (kw == "maxpool" || kw == "avgpool") {
      n.kind = kw == "maxpool" ? LayerKind::kMaxPool : LayerKind::kAvgPool;
      n.inputs = {attrs.required("from")};
      n.kernel = attrs.required_int("k");
      n.stride = attrs.required_int("s");
      if (n.kernel < 1 || n.stride < 1) throw ParseError(line_no, kw + " '" + n.name + "' needs k, s >= 1");
    } else if (kw == "fc") {
      n.kind = LayerKind::kFc;
      n.inputs = {attrs.required("from")};
      n.out = attrs.required_int("out");
      n.relu = attrs.flag_or("relu", true);
      n.dropout = attrs.double_or("dropout", 0.0);
      if (n.out < 1) throw ParseError(line_no, "fc '" + n.name + "' needs out >= 1");
      if (!(n.dropout >= 0.0 && n.dropout < 1.0)) throw ParseError(line_no, "dropout must lie in [0, 1)");
    } else if (kw == "add") {
      n.kind = LayerKind::kAdd;
      n.inputs = split_commas(attrs.required("from"));
      if (n.inputs.size() != 2 || n.inputs[0].empty() || n.inputs[1].empty()) {
        throw ParseError(line_no, "add '" + n.name + "' needs from=<shortcut>,<arm>");
      }
      n.relu = attrs.flag_or("relu", false);
    } else if (kw == "branch") {
      BranchSpec b;
      b.name = n.name;
      b.from = attrs.required("from");
      b.conv_channels = attrs.int_or("conv", 128);
      b.fc_width = attrs.int_or("fc", 1024);
      if (b.conv_channels < 1 || b.fc_width < 1) throw ParseError(line_no, "branch widths must be positive");
      attrs.finish();
      decls.push_back({line_no, std::nullopt, b});
      continue;
    } else if (kw == "output") {
      if (!output_name.empty()) throw ParseError(line_no, "second output directive; branches declare their own outputs");
      n.kind = LayerKind::kOutput;
      n.inputs = {attrs.required("from")};
      n.out = attrs.required_int("classes");
      if (n.out < 2) throw ParseError(line_no, "output needs classes >= 2");
      output_name = n.name;
      classes = n.out;
    } else {
      throw ParseError(line_no, "unknown layer kind '" + kw + "'");
    }
    attrs.finish();
    decls.push_back({line_no, n, std::nullopt});
  }

  if (!input_shape) throw ParseError(1, "missing input directive");

  GraphSpec g;
  g.input_shape = *input_shape;
  g.num_classes = classes;
  g.main_output = output_name;

  std::vector<LayerNode> nodes;
  std::map<std::string, int> line_of;
  auto add_node = [&](LayerNode n, int line) {
    if (!line_of.emplace(n.name, line).second) {
      throw ParseError(line, "duplicate name '" + n.name + "' (first defined on line " + std::to_string(line_of[n.name]) + ")");
    }
    nodes.push_back(std::move(n));
  };
  for (const Declaration& d : decls) {
    if (d.node) {
      add_node(*d.node, d.line);
      continue;
    }
    if (classes == 0) throw ParseError(d.line, "branch '" + d.branch->name + "' needs an output directive for its class count");
    const int group = static_cast<int>(g.branches.size()) + 1;
    for (LayerNode& n : expand_branch(*d.branch, group, classes)) add_node(std::move(n), d.line);
    g.branches.push_back(*d.branch);
    g.branch_outputs.push_back(d.branch->name);
  }

  for (const LayerNode& n : nodes) {
    for (const std::string& in : n.inputs) {
      if (!line_of.count(in)) throw ParseError(line_of[n.name], "'" + n.name + "' reads undefined node '" + in + "'");
    }
  }
  // Branch membership must not leak into the trunk.
  std::map<std::string, int> group_of;
  for (const LayerNode& n : nodes) group_of[n.name] = n.group;
  for (const BranchSpec& b : g.branches) {
    if (group_of.at(b.from) != 0) {
      throw ParseError(line_of[b.name], "branch '" + b.name + "' must read from a main-branch node");
    }
  }
  for (const LayerNode& n : nodes) {
    for (const std::string& in : n.inputs) {
      if (group_of.at(in) != 0 && group_of.at(in) != n.group) {
        throw ParseError(line_of[n.name], "'" + n.name + "' reads from inside branch node '" + in + "'");
      }
    }
  }

  std::string offending;
  try {
    g.nodes = topological_sort(std::move(nodes), &offending);
  } catch (const WiringError& e) {
    throw ParseError(offending.empty() ? 0 : line_of[offending], e.what());
  }
  return g;
}

std::string serialize_arch(const GraphSpec& g) {
  std::ostringstream os;
  std::set<int> emitted_groups;
  for (const LayerNode& n : g.nodes) {
    if (n.group != 0) {
      if (emitted_groups.insert(n.group).second) {
        const BranchSpec& b = g.branches.at(static_cast<std::size_t>(n.group - 1));
        os << "branch " << b.name << " from=" << b.from << " conv=" << b.conv_channels << " fc=" << b.fc_width << '\n';
      }
      continue;
    }
    switch (n.kind) {
      case LayerKind::kInput:
        os << "input " << g.input_shape.c << ' ' << g.input_shape.h << ' ' << g.input_shape.w << '\n';
        break;
      case LayerKind::kConv:
        os << "conv " << n.name << " from=" << n.inputs[0] << " out=" << n.out << " k=" << n.kernel << " s=" << n.stride
           << " p=" << n.pad << " relu=" << int(n.relu) << " scale=" << int(n.scale) << '\n';
        break;
      case LayerKind::kMaxPool:
      case LayerKind::kAvgPool:
        os << to_string(n.kind) << ' ' << n.name << " from=" << n.inputs[0] << " k=" << n.kernel << " s=" << n.stride << '\n';
        break;
      case LayerKind::kFc:
        os << "fc " << n.name << " from=" << n.inputs[0] << " out=" << n.out << " relu=" << int(n.relu)
           << " dropout=" << format_double(n.dropout) << '\n';
        break;
      case LayerKind::kAdd:
        os << "add " << n.name << " from=" << n.inputs[0] << ',' << n.inputs[1] << " relu=" << int(n.relu) << '\n';
        break;
      case LayerKind::kOutput:
        os << "output " << n.name << " from=" << n.inputs[0] << " classes=" << n.out << '\n';
        break;
    }
  }
  return os.str();
}

GraphSpec load_arch_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open architecture file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_arch(ss.str());
}

void save_arch_file(const GraphSpec& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write architecture file '" + path + "'");
  out << serialize_arch(g);
  if (!out) throw InputError("failed writing architecture file '" + path + "'");
}

}  // namespace rcnds::graph
