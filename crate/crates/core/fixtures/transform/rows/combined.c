int combined(int x) {
  int* q = new int[8];
  q++;
  int* p;
  p = q + x;
  p[0] = 6;
  return q[x];
}
