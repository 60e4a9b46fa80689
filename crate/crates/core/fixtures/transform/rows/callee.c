int first(int* p) {
  int k = *p;
  return k;
}

int twice(int* p) {
  p++;
  return p[0] * 2;
}
