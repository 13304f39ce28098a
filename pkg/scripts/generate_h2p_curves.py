"""Generate the bundled H2+ Born-Oppenheimer curve tables.

Solves the clamped-nuclei one-electron two-center Coulomb problem exactly in
prolate spheroidal coordinates (charges Z_a = Z_b = 1, m = 0).  The wavefunction
separates as X(xi) Y(eta); with E_el = -2 p^2 / R^2 the two factors obey

    d/dxi[(xi^2-1) X'] + (A + 2 R xi - p^2 xi^2) X = 0,      xi in [1, inf)
    d/deta[(1-eta^2) Y'] + (p^2 eta^2 - A) Y = 0,            eta in [-1, 1]

The angular factor is expanded in Legendre polynomials of fixed parity (even
for sigma_g, odd for sigma_u), which turns the eta equation into a tridiagonal
eigenproblem for the separation constant A(p^2).  The radial factor uses the
Jaffe substitution

    X = exp(-p(xi-1)) (xi+1)^sigma u(t),   t = (xi-1)/(xi+1),  sigma = R/p - 1

whose series coefficients obey the three-term recurrence

    (m+1)^2 g_{m+1} + beta_m g_m + (m-1-sigma)^2 g_{m-1} = 0
    beta_m = -2 m^2 + 2 m (sigma - 2 p) + A + 2 R + sigma - p^2 - 2 p

(derived by direct substitution; the t-space ODE has polynomial coefficients
t(t-1)^2 u'' + ... which collapse to three bands).  Requiring a minimal
solution with g_{-1} = 0 gives the continued-fraction eigencondition
f(E) = beta_0 + r_0(E) = 0 evaluated by backward recursion.

Output: two-column tables (R_bohr, V_hartree) with V referenced to the
H(1s) + p dissociation limit, written into src/floqep/data/.

Anchor values used for self-checks (exact to the printed digits):
    E_el(1s sigma_g, R=2) = -1.1026342144949
    E_el(2p sigma_u, R=2) = -0.6675343922024
"""

from __future__ import annotations

import os

import numpy as np
from scipy.linalg import eig

ANCHOR_G = -1.1026342144949
ANCHOR_U = -0.6675343922024
ASYMPTOTE = -0.5  # H(1s) + p, hartree


def angular_constant(p2: float, parity: int, lmax: int = 80) -> float:
    """Separation constant A: top eigenvalue of the Legendre-basis eta operator.

    parity 0 selects even l (gerade sigma), parity 1 odd l (ungerade sigma).
    """
    ls = np.arange(parity, lmax, 2)
    n = len(ls)
    K = np.zeros((n, n))
    for i, l in enumerate(ls):
        # eta^2 P_l = a_l P_{l+2} + b_l P_l + c_l P_{l-2}
        a_l = (l + 1) * (l + 2) / ((2 * l + 1) * (2 * l + 3))
        b_l = (l + 1) ** 2 / ((2 * l + 1) * (2 * l + 3))
        if l > 0:
            b_l += l**2 / ((2 * l + 1) * (2 * l - 1))
        K[i, i] = -l * (l + 1) + p2 * b_l
        if i + 1 < n:
            K[i + 1, i] = p2 * a_l
        if i >= 1:
            c_l = l * (l - 1) / ((2 * l + 1) * (2 * l - 1))
            K[i - 1, i] = p2 * c_l
    w = eig(K, right=False)
    return float(np.max(np.real(w)))


def eigencondition(E: float, R: float, parity: int, nmax: int = 500) -> float:
    """Jaffe continued-fraction residual; vanishes at electronic eigenvalues."""
    if E >= 0.0:
        raise ValueError("bound electronic state required (E < 0)")
    p = R * np.sqrt(-E / 2.0)
    sigma = R / p - 1.0
    A = angular_constant(p * p, parity)

    def beta(m: float) -> float:
        return -2.0 * m * m + 2.0 * m * (sigma - 2.0 * p) + A + 2.0 * R + sigma - p * p - 2.0 * p

    # backward recursion for the minimal-solution ratio r_m = g_{m+1}/g_m
    r = 1.0 - 2.0 * np.sqrt(p / nmax)
    for m in range(nmax, 0, -1):
        r = -((m - 1.0 - sigma) ** 2) / (beta(m) + (m + 1.0) ** 2 * r)
    return beta(0.0) + r


def refine_root(R: float, parity: int, e_lo: float, e_hi: float) -> float:
    """Bisection to near machine precision inside a sign-changing bracket."""
    f_lo = eigencondition(e_lo, R, parity)
    f_hi = eigencondition(e_hi, R, parity)
    if not np.isfinite(f_lo) or not np.isfinite(f_hi) or f_lo * f_hi > 0:
        raise RuntimeError(f"no bracket at R={R} parity={parity}: [{e_lo}, {e_hi}]")
    for _ in range(100):
        e_mid = 0.5 * (e_lo + e_hi)
        f_mid = eigencondition(e_mid, R, parity)
        if f_lo * f_mid <= 0:
            e_hi = e_mid
        else:
            e_lo, f_lo = e_mid, f_mid
        if e_hi - e_lo < 1e-14 * abs(e_mid):
            break
    return 0.5 * (e_lo + e_hi)


def scan_root(R: float, parity: int, e_lo: float, e_hi: float, n: int = 400) -> float:
    """Locate the lowest eigenvalue in [e_lo, e_hi] by dense scan + bisection."""
    grid = np.linspace(e_lo, e_hi, n)
    vals = np.array([eigencondition(e, R, parity) for e in grid])
    for i in range(len(grid) - 1):
        if np.isfinite(vals[i]) and np.isfinite(vals[i + 1]) and vals[i] * vals[i + 1] < 0:
            return refine_root(R, parity, grid[i], grid[i + 1])
    raise RuntimeError(f"no root found for R={R} parity={parity}")


def walk_curve(r_values: np.ndarray, parity: int, e_start: float) -> np.ndarray:
    """Electronic energies along r_values, warm-started from the previous point.

    r_values must start at the anchor distance (2.0) and be monotone.
    """
    energies = np.empty_like(r_values)
    e_prev = e_start
    slope = 0.0
    for i, R in enumerate(r_values):
        guess = e_prev + slope * (R - r_values[i - 1]) if i > 0 else e_prev
        # expanding bracket around the predicted energy
        half = max(2e-4, abs(slope) * (abs(R - r_values[i - 1]) if i else 1.0) * 0.5 + 2e-4)
        lo, hi = guess - half, min(guess + half, -1e-6)
        for _ in range(40):
            f_lo = eigencondition(lo, R, parity)
            f_hi = eigencondition(hi, R, parity)
            if np.isfinite(f_lo) and np.isfinite(f_hi) and f_lo * f_hi < 0:
                break
            half *= 2.0
            lo, hi = guess - half, min(guess + half, -1e-6)
        else:
            raise RuntimeError(f"bracket growth failed at R={R}")
        e_new = refine_root(R, parity, lo, hi)
        if i > 0:
            slope = (e_new - e_prev) / (R - r_values[i - 1])
        e_prev = e_new
        energies[i] = e_new
    return energies


def build_r_grid() -> np.ndarray:
    """Nonuniform table grid: dense at short range, moderate through the well."""
    parts = [
        np.arange(0.3, 1.0, 0.01),
        np.arange(1.0, 12.0, 0.02),
        np.arange(12.0, 30.0 + 1e-9, 0.05),
    ]
    return np.unique(np.round(np.concatenate(parts), 10))


def solve_state(r_grid: np.ndarray, parity: int, e_anchor: float) -> np.ndarray:
    """Full curve for one symmetry, walking out from the R=2 anchor."""
    i2 = int(np.argmin(np.abs(r_grid - 2.0)))
    assert abs(r_grid[i2] - 2.0) < 1e-12, "table grid must contain R=2"
    e2 = scan_root(2.0, parity, e_anchor - 0.05, e_anchor + 0.05)
    up = walk_curve(r_grid[i2:], parity, e2)
    down = walk_curve(r_grid[i2::-1], parity, e2)
    return np.concatenate([down[::-1], up[1:]])


def main() -> None:
    here = os.path.dirname(os.path.abspath(__file__))
    out_dir = os.path.join(here, "..", "src", "floqep", "data")
    os.makedirs(out_dir, exist_ok=True)

    r_grid = build_r_grid()
    print(f"table grid: {len(r_grid)} points, {r_grid[0]}..{r_grid[-1]} bohr")

    results = {}
    for name, parity, anchor in (("1ssg", 0, ANCHOR_G), ("2psu", 1, ANCHOR_U)):
        e_el = solve_state(r_grid, parity, anchor)
        v = e_el + 1.0 / r_grid - ASYMPTOTE  # referenced to H(1s)+p = 0
        results[name] = (e_el, v)
        print(f"{name}: E_el(R=2) = {e_el[np.argmin(np.abs(r_grid - 2.0))]:.12f}")

    # self-checks against the anchors and known curve features
    i2 = int(np.argmin(np.abs(r_grid - 2.0)))
    assert abs(results["1ssg"][0][i2] - ANCHOR_G) < 1e-10
    assert abs(results["2psu"][0][i2] - ANCHOR_U) < 1e-10

    vg = results["1ssg"][1]
    imin = int(np.argmin(vg))
    print(f"1ssg well: R_e = {r_grid[imin]:.4f} bohr, depth = {-vg[imin]:.8f} hartree")
    assert 1.95 < r_grid[imin] < 2.05
    assert 0.1020 < -vg[imin] < 0.1030

    vu = results["2psu"][1]
    j = int(np.argmin(vu))
    print(f"2psu long-range well: R = {r_grid[j]:.2f} bohr, depth = {-vu[j]:.3e} hartree")
    assert vu[j] < 0.0 and -vu[j] < 2e-4  # shallow van der Waals dip only
    # endpoint should match the charge-induced-dipole tail -9/(4 R^4)
    tail = -9.0 / (4.0 * r_grid[-1] ** 4)
    assert abs(vg[-1] - tail) < 3e-7 and abs(vu[-1] - tail) < 3e-7

    header = (
        "# H2+ Born-Oppenheimer potential, {label} (m = 0), clamped nuclei.\n"
        "# Exact two-center Coulomb eigenvalues: prolate-spheroidal separation,\n"
        "# Legendre expansion for the angular factor, Jaffe continued fraction\n"
        "# for the radial factor.  Generated by scripts/generate_h2p_curves.py.\n"
        "# Columns: R [bohr]   V [hartree], zero of energy at the H(1s)+p limit.\n"
    )
    labels = {"1ssg": "1s sigma_g", "2psu": "2p sigma_u"}
    for name in ("1ssg", "2psu"):
        path = os.path.join(out_dir, f"h2p_{name}.tsv")
        with open(path, "w") as fh:
            fh.write(header.format(label=labels[name]))
            for R, v in zip(r_grid, results[name][1]):
                fh.write(f"{R:.10g}\t{v:.14e}\n")
        print("wrote", os.path.normpath(path))


if __name__ == "__main__":
    main()
