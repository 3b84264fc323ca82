#include <iostream>

#include "prim/cli/commands.hpp"
#include "prim/core/runtime.hpp"

int main(int argc, char** argv) {
  prim::tune_allocator();
  return prim::cli::run(argc, argv, std::cout, std::cerr);
}
