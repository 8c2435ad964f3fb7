#include "ssmix/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return ssmix::cli::run(argc, argv, std::cout, std::cerr);
}
