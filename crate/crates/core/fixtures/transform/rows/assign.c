int assign() {
  int* q = new int[4];
  q++;
  int* p;
  p = q;
  p[1] = 4;
  return q[1];
}
