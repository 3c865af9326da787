#include <vector>

#include "hycone/cli.hpp"

int main(int argc, char** argv) {
  return hycone::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
