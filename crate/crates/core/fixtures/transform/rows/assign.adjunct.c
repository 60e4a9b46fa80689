int assign() {
    int* q = new int[4];
    long q_adj = 0;
    q_adj++;
    int* p;
    long p_adj = 0;
    p = q;
    p_adj = q_adj;
    p[1 + p_adj] = 4;
    return q[1 + q_adj];
}
