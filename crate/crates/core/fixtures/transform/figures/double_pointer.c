int double_pointer(int i) {
  int* a = new int[10];
  int** p = &a;
  int x = (*p)[i];
  a++;
  int y = (*p)[i];
  return x + y;
}
