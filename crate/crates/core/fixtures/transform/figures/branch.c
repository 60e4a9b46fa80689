void keep(int** x, int** y);

void branch(int* ptr, int exp) {
  int* x;
  int* y;
  if (exp) {
    x = ptr++;
  } else {
    y = ptr + 2;
  }
  keep(&x, &y);
}
