void keep(int** x, int** y);

void branch(int* ptr, int exp) {
    long ptr_adj = 0;
    int* x;
    int* y;
    if (exp) {
        x = ptr + ptr_adj;
        ptr_adj++;
    } else {
        y = ptr + ptr_adj + 2;
    }
    keep(&x, &y);
}
