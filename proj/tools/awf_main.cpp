#include <string>
#include <vector>

#include "awf/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return awf::cli::run(args);
}
