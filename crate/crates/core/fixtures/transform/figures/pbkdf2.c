void pbkdf2(char* p, char* data, int cplen, int n) {
  for (int i = 0; i < cplen * n; i += cplen) {
    for (int k = 0; k < cplen; k++) {
      p[k] = p[k] ^ data[k];
    }
    p += cplen;
  }
}
