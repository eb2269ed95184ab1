#include <string>
#include <vector>

#include "graphsmooth/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return graphsmooth::run_cli(args);
}
