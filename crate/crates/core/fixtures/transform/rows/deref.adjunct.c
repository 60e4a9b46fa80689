int deref() {
    int* p = new int[4];
    long p_adj = 0;
    p[p_adj] = 3;
    int k = p[p_adj];
    return k;
}
