int addr_of(int i) {
    int* a = new int[8];
    long a_adj = 0;
    int* p = a;
    long p_adj = i + a_adj;
    p[1 + p_adj] = 2;
    return a[i + 1 + a_adj];
}
