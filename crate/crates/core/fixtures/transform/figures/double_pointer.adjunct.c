int double_pointer(int i) {
    int* a = new int[10];
    long a_adj = 0;
    int** p = &a;
    long p_adj = 0;
    int x = p[p_adj][i + a_adj];
    a_adj++;
    int y = p[p_adj][i + a_adj];
    return x + y;
}
