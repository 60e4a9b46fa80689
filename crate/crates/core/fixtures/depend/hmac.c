long* hmac(int n) {
  long* salt = new long[n];
  for (int i = 0; i < n; i++) {
    salt[i] = i * 3 + 1;
  }
  void* base_hctx = HMAC_CTX_new();
  HMAC_Update(base_hctx, salt, n);
  long* out = new long[n];
  void* hctx = HMAC_CTX_new();
  for (int i = 0; i < n; i++) {
    HMAC_CTX_copy(hctx, base_hctx);
    HMAC_Update(hctx, salt + i, 1);
    out[i] = HMAC_Final(hctx);
  }
  HMAC_CTX_free(hctx);
  HMAC_CTX_free(base_hctx);
  return out;
}
