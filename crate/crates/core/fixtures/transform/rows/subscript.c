int subscript(int i) {
  int* p = new int[8];
  p[i] = 5;
  p[i + 1] = p[i] * 2;
  return p[i + 1];
}
