void init_pointer(char** p, int n) {
  *p = malloc(n);
  memset(*p, 0, n);
}

int main(int argc, char** argv) {
  char* buf;
  init_pointer(&buf, atoi(argv[1]));

  return 0;
}
