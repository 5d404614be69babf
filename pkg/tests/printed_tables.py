"""Published table entries (rows: velocity or n_out; columns: mu = 1, 10, 1e2,
1e3, 1e4, 1e6 keV), used as one-significant-figure references."""

TABLE1_R_C_CM = [
    [3e-5, 3e-6, 3e-7, 3e-8, 3e-9, 3e-11],
    [2e-4, 2e-5, 2e-6, 2e-7, 2e-8, 2e-10],
    [9e-4, 9e-5, 9e-6, 9e-7, 9e-8, 9e-10],
]
TABLE2_T_R_S = [
    [4e-12, 4e-13, 4e-14, 4e-15, 4e-16, 4e-18],
    [2e-10, 2e-11, 2e-12, 2e-13, 2e-14, 2e-16],
    [3e-9, 3e-10, 3e-11, 3e-12, 3e-13, 3e-15],
]
TABLE3_GAMMA_RHO = [
    [2e-21, 2e-19, 2e-17, 2e-15, 2e-13, 2e-9],
    [2e-7, 2e-5, 2e-3, 2e-1, 2e1, 2e5],
]
TABLE4_RHO = [
    [3e0, 3e4, 3e8, 3e12, 3e16, 3e24],
    [3e14, 3e18, 3e22, 3e26, 3e30, 3e38],
]
PRINTED = {"table1": TABLE1_R_C_CM, "table2": TABLE2_T_R_S,
           "table3": TABLE3_GAMMA_RHO, "table4": TABLE4_RHO}
