#include <cstdio>

int main() {
  std::puts("bench under construction");
  return 0;
}
