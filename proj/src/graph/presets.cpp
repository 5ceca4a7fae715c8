#include "rcnds/graph/presets.hpp"

#include <algorithm>
#include <sstream>

#include "rcnds/core/error.hpp"
#include "rcnds/graph/dsl.hpp"

namespace rcnds::graph {
namespace {

class PresetWriter {
 public:
  PresetWriter(const PresetOptions& o) : div_(std::max(1, o.width_divisor)) {}

  int width(int full) const { return std::max(1, full / div_); }

  void conv(const std::string& name, const std::string& from, int channels, int k, int s, int p, bool relu) {
    os_ << "conv " << name << " from=" << from << " out=" << width(channels) << " k=" << k << " s=" << s
        << " p=" << p << " relu=" << int(relu) << " scale=1\n";
  }
  void maxpool(const std::string& name, const std::string& from, int k, int s) {
    os_ << "maxpool " << name << " from=" << from << " k=" << k << " s=" << s << '\n';
  }
  void add(const std::string& name, const std::string& shortcut, const std::string& arm) {
    os_ << "add " << name << " from=" << shortcut << ',' << arm << " relu=1\n";
  }
  void branch(const std::string& name, const std::string& from) {
    os_ << "branch " << name << " from=" << from << " conv=" << width(128) << " fc=" << width(1024) << '\n';
  }
  void fc(const std::string& name, const std::string& from, int out, bool hidden) {
    os_ << "fc " << name << " from=" << from << " out=" << out << " relu=" << int(hidden)
        << " dropout=" << (hidden ? "0.5" : "0") << '\n';
  }
  std::ostringstream& stream() { return os_; }

 private:
  int div_;
  std::ostringstream os_;
};

}  // namespace

std::string preset_source(const std::string& name, int num_classes, CHW input, const PresetOptions& options) {
  if (name != "cnds8" && name != "rcnds8" && name != "rcnds10") {
    throw ConfigError("unknown preset '" + name + "' (expected cnds8, rcnds8 or rcnds10)");
  }
  if (num_classes < 2) throw ConfigError("preset needs at least 2 classes");
  const bool residual = name != "cnds8";
  const bool ten = name == "rcnds10";

  PresetWriter w(options);
  w.stream() << "# " << name << '\n' << "input " << input.c << ' ' << input.h << ' ' << input.w << '\n';

  const int stem_stride = options.compact_stem ? 1 : 2;
  if (ten) w.conv("conv1", "input", 64, 7, stem_stride, 3, true);
  else w.conv("conv1", "input", 64, 3, stem_stride, 1, true);
  if (options.compact_stem) w.maxpool("pool1", "conv1", 2, 2);
  else w.maxpool("pool1", "conv1", 3, 2);
  w.conv("conv2", "pool1", 128, 3, 1, 1, true);
  w.maxpool("pool2", "conv2", 2, 2);

  // Stage: conv<s>_1 -> conv<s>_2 joined with the stage input. The conv
  // feeding a join carries no relu; one relu follows the join instead.
  auto stage = [&](int s, const std::string& in, int channels) -> std::string {
    const std::string a = "conv" + std::to_string(s) + "_1", b = "conv" + std::to_string(s) + "_2";
    w.conv(a, in, channels, 3, 1, 1, true);
    w.conv(b, a, channels, 3, 1, 1, !residual);
    if (!residual) return b;
    const std::string join = "rc" + std::to_string(s - 2);
    w.add(join, in, b);
    return join;
  };

  const std::string s3 = stage(3, "pool2", 256);
  w.branch("branch1", s3);
  w.maxpool("pool3", s3, 2, 2);
  const std::string s4 = stage(4, "pool3", 512);
  if (ten) w.branch("branch2", s4);
  w.maxpool("pool4", s4, 2, 2);
  const std::string s5 = stage(5, "pool4", 512);
  w.maxpool("pool5", s5, 2, 2);
  std::string trunk = "pool5";
  if (ten) {
    const std::string s6 = stage(6, "pool5", 512);
    w.maxpool("pool6", s6, 2, 2);
    trunk = "pool6";
  }
  w.fc("fc6", trunk, w.width(4096), true);
  w.fc("fc7", "fc6", w.width(4096), true);
  w.fc("fc8", "fc7", num_classes, false);
  w.stream() << "output prob from=fc8 classes=" << num_classes << '\n';
  return w.stream().str();
}

GraphSpec build_preset(const std::string& name, int num_classes, CHW input, const PresetOptions& options) {
  return validate_residuals(parse_arch(preset_source(name, num_classes, input, options)));
}

}  // namespace rcnds::graph
