// Regenerates tests/fixtures/e2e: make_e2e_fixture <dir> [seed]
#include <cstdlib>
#include <iostream>

#include "synthetic.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: make_e2e_fixture <dir> [seed]\n";
    return 2;
  }
  const std::uint64_t seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 7;
  mtdetect::synth::write_e2e_fixture(argv[1], seed);
  return 0;
}
