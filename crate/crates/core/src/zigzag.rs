//! The JPEG zigzag scan.

/// `ZIGZAG[k]` is the natural (row-major) index of zigzag position `k`.
pub const ZIGZAG: [usize; 64] = [
    0, 1, 8, 16, 9, 2, 3, 10, //
    17, 24, 32, 25, 18, 11, 4, 5, //
    12, 19, 26, 33, 40, 48, 41, 34, //
    27, 20, 13, 6, 7, 14, 21, 28, //
    35, 42, 49, 56, 57, 50, 43, 36, //
    29, 22, 15, 23, 30, 37, 44, 51, //
    58, 59, 52, 45, 38, 31, 39, 46, //
    53, 60, 61, 54, 47, 55, 62, 63,
];

/// Places 64 zigzag-ordered values into an 8×8 array (`[row][col]`).
pub fn inverse_zigzag<T: Copy + Default>(zz: &[T; 64]) -> [[T; 8]; 8] {
    let mut out = [[T::default(); 8]; 8];
    for (k, &v) in zz.iter().enumerate() {
        let n = ZIGZAG[k];
        out[n / 8][n % 8] = v;
    }
    out
}

/// Inverse of [`inverse_zigzag`].
pub fn zigzag<T: Copy + Default>(block: &[[T; 8]; 8]) -> [T; 64] {
    let mut out = [T::default(); 64];
    for (k, slot) in out.iter_mut().enumerate() {
        let n = ZIGZAG[k];
        *slot = block[n / 8][n % 8];
    }
    out
}
