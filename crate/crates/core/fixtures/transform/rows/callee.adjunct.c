int first(int* p) {
    long p_adj = 0;
    int k = p[p_adj];
    return k;
}

int twice(int* p) {
    long p_adj1 = 0;
    p_adj1++;
    return p[p_adj1] * 2;
}
