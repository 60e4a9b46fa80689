long* same_cell(int n) {
  long* acc = new long[1];
  acc[0] = 0;
  for (int i = 0; i < n; i++) {
    acc[0] = i * 2;
  }
  return acc;
}
