struct SparseMatrix {
    int* nnz_in_row;
    double** ptr_to_vals;
    int** ptr_to_inds;
};

void init(struct SparseMatrix* A, int nrow, int max_nnz) {
    long A_adj = 0;
    for (int currow = 0; currow < nrow; currow++) {
        A[A_adj].ptr_to_vals[currow] = new double[max_nnz];
        long vals_adj = 0;
        A[A_adj].ptr_to_inds[currow] = new int[max_nnz];
        long inds_adj = 0;
        for (int curcol = 0; curcol < max_nnz; curcol++) {
            A[A_adj].ptr_to_vals[currow][vals_adj] = 27.0;
            A[A_adj].ptr_to_inds[currow][inds_adj] = curcol;
            vals_adj++;
            inds_adj++;
        }
    }
}
