int decl() {
    int* p = new int[4];
    long p_adj = 0;
    p[p_adj] = 7;
    return p[p_adj];
}
