#include <iostream>
#include <string>
#include <vector>

#include "cannibal/cli.hpp"

int main(int argc, char** argv) {
  cannibal::cli::configure_logging();
  return cannibal::cli::run(std::vector<std::string>(argv + 1, argv + argc),
                            std::cout, std::cerr);
}
