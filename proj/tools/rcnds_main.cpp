#include <iostream>

#include "rcnds/cli/cli.hpp"

int main(int argc, char** argv) { return rcnds::cli::cli_dispatch(argc, argv, std::cout, std::cerr); }
