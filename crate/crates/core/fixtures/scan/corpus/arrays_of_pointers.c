// Double pointer that iterates over an array of pointers.
int pick(int i) {
  int* a = new int[10];
  int* b = new int[10];
  a[i] = 1;
  b[i] = 2;

  int** p = new int*[2];
  p[0] = a;
  p[1] = b;
  if (i > 3) {
    p++;
  }
  return (*p)[i];
}
