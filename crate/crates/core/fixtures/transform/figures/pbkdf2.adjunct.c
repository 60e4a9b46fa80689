void pbkdf2(char* p, char* data, int cplen, int n) {
    long p_adj = 0;
    long data_adj = 0;
    for (int i = 0; i < cplen * n; i += cplen) {
        for (int k = 0; k < cplen; k++) {
            p[k + p_adj] = p[k + p_adj] ^ data[k + data_adj];
        }
        p_adj += cplen;
    }
}
