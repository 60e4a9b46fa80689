int decl() {
  int* p = new int[4];
  p[0] = 7;
  return p[0];
}
