/* Key derivation block loop.
   Every block is independent. */
void derive(char* out, char* data, int cplen, int n) {
  char* p = out;
  for (int i = 0; i < cplen * n; i += cplen) {
    for (int k = 0; k < cplen; k++) {
      p[k] = p[k] ^ data[k];
    }
    p += cplen;
  }
}

long checksum(long* v, int n) {
  long s = 0;
  long* end = v + n;
  for (long* q = v; q < end; q++) {
    s += *q;
  }
  return s;
}
