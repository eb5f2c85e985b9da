#include <string>
#include <vector>

#include "provox/cli.hpp"

int main(int argc, char** argv) {
  return provox::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
