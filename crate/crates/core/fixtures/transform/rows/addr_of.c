int addr_of(int i) {
  int* a = new int[8];
  int* p = &a[i];
  p[1] = 2;
  return a[i + 1];
}
