#include <string>
#include <vector>

#include "mvsde/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return mvsde::run_cli(args);
}
