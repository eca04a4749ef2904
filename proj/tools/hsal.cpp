#include <malloc.h>

#include <iostream>
#include <string>
#include <vector>

#include "hsal/cli.hpp"

int main(int argc, char** argv) {
  // Tapes allocate and free many short-lived multi-megabyte buffers; keep
  // them on the heap instead of round-tripping through mmap.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
  std::vector<std::string> args(argv + 1, argv + argc);
  return hsal::cli::run(args, std::cout, std::cerr);
}
