long* memcpy_right(int n) {
  char* q = new char[1];
  *q = 42;
  long* data = new long[n];
  for (int i = 0; i < n; i++) {
    char p = 0;
    memcpy(&p, q, 1);
    data[i] = p + i;
  }
  return data;
}
