// Uses syntax outside the subset; counted for lines only.
#include <stdio.h>

int main(int argc, char** argv) {
  char** it = argv;
  while (*it) { it++; }
  return 0;
}
