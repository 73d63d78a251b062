#include <vector>
#include <string>

#include "topp3/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return topp3::cli::run(args);
}
