int undecidable(int i, int c) {
    int a[10];
    int b[10];
    for (int k = 0; k < 10; k++) {
        a[k] = k;
        b[k] = 2 * k;
    }
    int* p;
    if (c > 0) {
        p = a;
    } else {
        p = b;
    }
    p[i] = 5;
    int* q = a;
    long q_adj = 0;
    q_adj++;
    int r = p[i];
    return r + q[q_adj];
}
