#include <cstdio>

#include "rfgan/archspec.hpp"

int main(int argc, char** argv) {
  (void)argc;
  (void)argv;
  std::printf("rfgan cli placeholder\n");
  return 0;
}
