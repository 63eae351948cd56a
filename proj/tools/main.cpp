#include <iostream>
#include <string>
#include <vector>

#include "mslu/cli.hpp"

int main(int argc, char** argv) {
  return mslu::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
