long* matvec(int n) {
  long* a = new long[n * n];
  long* x = new long[n];
  long* y = new long[n];
  for (int k = 0; k < n * n; k++) {
    a[k] = k % 7 - 3;
  }
  for (int i = 0; i < n; i++) {
    x[i] = i + 1;
  }
  for (int i = 0; i < n; i++) {
    long sum = 0;
    for (int j = 0; j < n; j++) {
      sum += a[i * n + j] * x[j];
    }
    y[i] = sum;
  }
  long total = 0;
  for (int i = 0; i < n; i++) {
    total += y[i];
  }
  y[0] = total;
  return y;
}
