int subscript(int i) {
    int* p = new int[8];
    long p_adj = 0;
    p[i + p_adj] = 5;
    p[i + 1 + p_adj] = p[i + p_adj] * 2;
    return p[i + 1 + p_adj];
}
