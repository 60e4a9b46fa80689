int sum(int* v, int n);

int call(int n) {
  int* p = new int[n + 2];
  for (int i = 0; i < n + 2; i++) {
    p[i] = i;
  }
  p += 2;
  return sum(p, n);
}
