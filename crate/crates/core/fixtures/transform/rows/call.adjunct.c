int sum(int* v, int n);

int call(int n) {
    int* p = new int[n + 2];
    long p_adj = 0;
    for (int i = 0; i < n + 2; i++) {
        p[i + p_adj] = i;
    }
    p_adj += 2;
    return sum(p + p_adj, n);
}
