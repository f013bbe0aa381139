#include <malloc.h>

#include <iostream>

#include "uda/cli.hpp"

int main(int argc, char** argv) {
  // Keep large tensors on the heap instead of a fresh mapping per allocation.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  return uda::run_cli(argc, argv, std::cout, std::cerr);
}
