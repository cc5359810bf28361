"""Derive partial-fraction Lanczos coefficients for complex log-gamma.

The approximation used in crates/core/src/quadrature/gamma.rs is

    Gamma(z + 1) = sqrt(2 pi) (z + g + 1/2)^(z + 1/2) exp(-(z + g + 1/2)) A(z)
    A(z) = c_0 + sum_{k=1}^{n-1} c_k / (z + k)

For fixed g the n coefficients are fixed by requiring A to be exact at
z = 0, 1, ..., n - 1, which is a small dense linear system solved here in
high precision. The script also reports the worst relative error of the
resulting |Gamma(t + ix)|^2 over the box t in [0.5, 50], |x| <= 50.

Usage: python3 scripts/lanczos_coefficients.py
"""

import mpmath as mp

mp.mp.dps = 60
G = mp.mpf(607) / 128
N = 15


def target(z):
    zgh = z + G + mp.mpf(1) / 2
    return mp.gamma(z + 1) / (mp.sqrt(2 * mp.pi) * zgh ** (z + mp.mpf(1) / 2) * mp.exp(-zgh))


def solve():
    pts = [mp.mpf(j) for j in range(N)]
    mat = mp.matrix(N, N)
    rhs = mp.matrix(N, 1)
    for i, z in enumerate(pts):
        mat[i, 0] = 1
        for k in range(1, N):
            mat[i, k] = 1 / (z + k)
        rhs[i] = target(z)
    return mp.lu_solve(mat, rhs)


def lngamma(coeffs, z):
    z = z - 1
    acc = coeffs[0]
    for k in range(1, N):
        acc += coeffs[k] / (z + k)
    zgh = z + G + 0.5
    return 0.5 * mp.log(2 * mp.pi) + (z + 0.5) * mp.log(zgh) - zgh + mp.log(acc)


def main():
    coeffs = solve()
    print(f"g = {mp.nstr(G, 20)}")
    for c in coeffs:
        print(f"    {mp.nstr(c, 20, min_fixed=-1, max_fixed=-1)},")
    flo = [float(c) for c in coeffs]
    worst = 0.0
    for t in [0.5, 0.75, 1, 1.5, 2.5, 7, 20, 50]:
        for x in [0, 0.1, 1, 3, 10, 25, 50]:
            z = mp.mpc(t, x)
            approx = 2 * mp.re(lngamma([mp.mpf(c) for c in flo], z))
            exact = 2 * mp.re(mp.loggamma(z))
            worst = max(worst, abs(float(approx - exact)))
    print(f"worst |log|Gamma|^2 error| with f64 coefficients: {worst:.3e}")


if __name__ == "__main__":
    main()
