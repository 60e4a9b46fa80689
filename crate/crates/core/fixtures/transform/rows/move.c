int move(int x) {
  int* p = new int[16];
  p += x;
  p = p - 1;
  p++;
  p -= 2;
  p[0] = 9;
  return p[0];
}
