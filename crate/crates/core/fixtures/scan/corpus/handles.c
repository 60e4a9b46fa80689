struct buffer {
  long* data;
  long len;
};

void make(long** out, long n) {
  out[0] = new long[n];
}

long use(struct buffer* b, int n) {
  long* a;
  make(&a, n);
  long** pa = &a;
  (*pa)[0] = 5;      // reads through the handle, no iteration
  b->data = a;
  long** rows = new long*[n];
  rows[0] = a;
  long** cursor = rows + 1;
  return cursor - rows;
}
