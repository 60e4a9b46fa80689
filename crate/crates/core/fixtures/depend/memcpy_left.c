char* memcpy_left(int n) {
  char* p = new char[1];
  *p = 0;
  for (int i = 0; i < n; i++) {
    char q = *p + i;
    memcpy(p, &q, 1);
  }
  return p;
}
