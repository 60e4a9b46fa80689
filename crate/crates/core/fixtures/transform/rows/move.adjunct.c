int move(int x) {
    int* p = new int[16];
    long p_adj = 0;
    p_adj += x;
    p_adj = p_adj - 1;
    p_adj++;
    p_adj -= 2;
    p[p_adj] = 9;
    return p[p_adj];
}
