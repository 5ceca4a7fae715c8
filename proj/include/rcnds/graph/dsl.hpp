#pragma once

// Architecture description language. UTF-8 text, one directive per line,
// `#` starts a comment:
//
//   input <c> <h> <w>
//   conv <name> from=<node> out=<ch> k=<k> [s=<s>] [p=<p>] [relu=0|1] [scale=0|1]
//   maxpool|avgpool <name> from=<node> k=<k> s=<s>
//   fc <name> from=<node> out=<n> [relu=0|1] [dropout=<p>]
//   add <name> from=<shortcut>,<arm> [relu=0|1]
//   branch <name> from=<node> [conv=<ch>] [fc=<n>]
//   output <name> from=<node> classes=<k>
//
// Defaults: s=1 p=0 relu=1 scale=0 for conv; relu=1 dropout=0 for fc;
// relu=0 for add; conv=128 fc=1024 for branch. Branches take their class
// count from the `output` directive.

#include <string>
#include <string_view>

#include "rcnds/graph/graph_spec.hpp"

namespace rcnds::graph {

/// Throws ParseError (with line number) on unknown kinds or keys, duplicate
/// names, dangling references, cycles and malformed values.
GraphSpec parse_arch(std::string_view text);

/// Canonical text: nodes in topological order, every key spelled out,
/// branches collapsed back to a single `branch` directive.
std::string serialize_arch(const GraphSpec& g);

GraphSpec load_arch_file(const std::string& path);
void save_arch_file(const GraphSpec& g, const std::string& path);

}  // namespace rcnds::graph
