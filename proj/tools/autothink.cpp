#include <iostream>
#include <string>
#include <vector>

#include "autothink/cli.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return autothink::cli::run(args, std::cout, std::cerr);
}
