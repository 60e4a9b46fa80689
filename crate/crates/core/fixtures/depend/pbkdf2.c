long* pbkdf2(int n) {
  int cplen = 4;
  long* out = new long[cplen * n];
  long* data = new long[cplen];
  for (int k = 0; k < cplen; k++) {
    data[k] = k * 7 + 3;
  }
  for (int i = 0; i < cplen * n; i++) {
    out[i] = i * 5;
  }
  long* p = out;
  for (int i = 0; i < cplen * n; i += cplen) {
    for (int k = 0; k < cplen; k++) {
      p[k] = p[k] ^ data[k];
    }
    p += cplen;
  }
  return out;
}
