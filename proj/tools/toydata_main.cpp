// Writes the synthetic shape datasets used for desk-scale runs:
//   rcnds-toydata --out DIR [--classes 8] [--per-class 64] [--side 64]
//                 [--seed 1] [--shape-offset 0] [--split train]

#include <CLI11.hpp>
#include <iostream>

#include "rcnds/core/error.hpp"
#include "rcnds/train/toy.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Synthetic colored-shape dataset generator", "rcnds-toydata"};
  rcnds::train::ToyOptions o;
  std::string out, split = "train";
  app.add_option("--out", out)->required();
  app.add_option("--classes", o.classes)->capture_default_str();
  app.add_option("--per-class", o.per_class)->capture_default_str();
  app.add_option("--side", o.side)->capture_default_str();
  app.add_option("--seed", o.seed)->capture_default_str();
  app.add_option("--shape-offset", o.shape_offset, "first shape kind (0-11)")->capture_default_str();
  app.add_option("--split", split)->check(CLI::IsMember({"train", "val", "test"}))->capture_default_str();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  const auto s = split == "train" ? rcnds::io::Split::kTrain : split == "val" ? rcnds::io::Split::kVal : rcnds::io::Split::kTest;
  try {
    std::cout << rcnds::train::write_toy_dataset(rcnds::train::make_toy_dataset(o), out, s) << '\n';
  } catch (const rcnds::ConfigError& e) {
    std::cerr << "rcnds-toydata: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "rcnds-toydata: " << e.what() << '\n';
    return 3;
  }
}
