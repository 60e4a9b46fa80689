int deref() {
  int* p = new int[4];
  *p = 3;
  int k = *p;
  return k;
}
