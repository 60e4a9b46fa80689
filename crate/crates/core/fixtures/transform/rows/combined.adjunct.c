int combined(int x) {
    int* q = new int[8];
    long q_adj = 0;
    q_adj++;
    int* p;
    long p_adj = 0;
    p = q;
    p_adj = q_adj + x;
    p[p_adj] = 6;
    return q[x + q_adj];
}
