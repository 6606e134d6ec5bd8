"""Independent oracles for the test suite.

Everything here is computed without touching the library's linear-algebra
paths: symbolic expansion (sympy), exact fractions, or explicit index loops
over raw numpy arrays.  Tests freeze expected values from these.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import sympy as sp

WBAR_LABELS = ("okbar", "failbar")
W_LABELS = ("ok", "fail")


def unitary_joint_cells(theta):
    """Symbolic (wbar, w) joint from expanding the final state by hand.

    The final state has three branches over (lab-Lbar pointer, lab-L pointer):
    (heads-lab, minus), (tails-lab, minus), (tails-lab, plus) with amplitudes
    sqrt(1/3), e^{i theta} sqrt(1/3), e^{i theta} sqrt(1/3).  Announcement
    vectors are (first -/+ second pointer)/sqrt(2) on each lab.
    """
    th = sp.sympify(theta)
    amp3 = sp.sqrt(sp.Rational(1, 3))
    phase = sp.exp(sp.I * th)
    branches = ((0, 0, amp3), (1, 0, phase * amp3), (1, 1, phase * amp3))
    half = sp.sqrt(sp.Rational(1, 2))
    overlap = {
        "okbar": (half, -half),
        "failbar": (half, half),
        "ok": (half, -half),
        "fail": (half, half),
    }
    cells = {}
    for wb in WBAR_LABELS:
        for w in W_LABELS:
            amp = sum(
                coeff * sp.conjugate(overlap[wb][i]) * sp.conjugate(overlap[w][j])
                for i, j, coeff in branches
            )
            cells[(wb, w)] = sp.simplify(sp.Abs(amp) ** 2)
    return cells


def unitary_joint_numeric(theta: float) -> dict[tuple[str, str], float]:
    cells = unitary_joint_cells(sp.Float(theta, 30))
    return {k: float(sp.N(v, 30)) for k, v in cells.items()}


def collapse_joint_cells() -> dict[tuple[str, str], Fraction]:
    """Exact collapse-picture joint by trajectory enumeration.

    The announcement bases are unbiased against the lab pointer states
    (|<ok-type|pointer>|^2 = 1/2 for every pointer), so each announcement is
    a fair coin regardless of the trajectory; the phase never enters.
    """
    half = Fraction(1, 2)
    cells = {(wb, w): Fraction(0) for wb in WBAR_LABELS for w in W_LABELS}
    for _r, p_r in (("heads", Fraction(1, 3)), ("tails", Fraction(2, 3))):
        for wb in WBAR_LABELS:
            for w in W_LABELS:
                cells[(wb, w)] += p_r * half * half
    return cells


def collapse_record_table() -> dict[tuple[str, str, str, str], Fraction]:
    """Exact collapse-picture (r, z, wbar, w) table; z follows the prepared spin."""
    half = Fraction(1, 2)
    table = {}
    trajectories = (
        ("heads", (("-1/2", Fraction(1)),)),
        ("tails", (("-1/2", half), ("+1/2", half))),
    )
    priors = {"heads": Fraction(1, 3), "tails": Fraction(2, 3)}
    for r, z_branches in trajectories:
        for z, p_z in z_branches:
            for wb in WBAR_LABELS:
                for w in W_LABELS:
                    table[(r, z, wb, w)] = priors[r] * p_z * half * half
    return table


def loop_partial_trace(mat: np.ndarray, dims: tuple[int, ...], keep_axes: tuple[int, ...]) -> np.ndarray:
    """Partial trace by explicit index loops over flat matrix entries."""
    n = len(dims)
    keep_axes = tuple(sorted(keep_axes))
    traced = [a for a in range(n) if a not in keep_axes]
    keep_dims = [dims[a] for a in keep_axes]
    dk = int(np.prod(keep_dims))
    out = np.zeros((dk, dk), dtype=complex)
    d = int(np.prod(dims))
    for i in range(d):
        mi = np.unravel_index(i, dims)
        for j in range(d):
            mj = np.unravel_index(j, dims)
            if any(mi[a] != mj[a] for a in traced):
                continue
            ik = np.ravel_multi_index([mi[a] for a in keep_axes], keep_dims) if keep_dims else 0
            jk = np.ravel_multi_index([mj[a] for a in keep_axes], keep_dims) if keep_dims else 0
            out[ik, jk] += mat[i, j]
    return out


def loop_dephase(mat: np.ndarray, dims: tuple[int, ...], axes: tuple[int, ...]) -> np.ndarray:
    """Computational-basis dephasing by zeroing mismatched sub-indices."""
    d = int(np.prod(dims))
    out = mat.copy()
    for i in range(d):
        mi = np.unravel_index(i, dims)
        for j in range(d):
            mj = np.unravel_index(j, dims)
            if any(mi[a] != mj[a] for a in axes):
                out[i, j] = 0.0
    return out


# Frozen raw-numpy constructions of the four benchmark descriptions.
# Index conventions: lab Lbar lives on (coin, coin-memory) with dims (2, 3)
# and pointer states |heads, slot1>, |tails, slot2>; lab L lives on
# (spin, spin-memory) with dims (2, 3) and pointers |down, slot1>, |up, slot2>.


def lab_pure_after_tails() -> np.ndarray:
    """Pure lab-L state fed by an x-polarized spin: (|down,-> + |up,+>)/sqrt(2)."""
    v = np.zeros(6, dtype=complex)
    v[np.ravel_multi_index((0, 1), (2, 3))] = np.sqrt(0.5)
    v[np.ravel_multi_index((1, 2), (2, 3))] = np.sqrt(0.5)
    return v


def lab_mixture_after_tails() -> np.ndarray:
    """Collapse-picture lab-L description: equal mixture of the two pointers."""
    rho = np.zeros((6, 6), dtype=complex)
    for idx in ((0, 1), (1, 2)):
        k = np.ravel_multi_index(idx, (2, 3))
        rho[k, k] = 0.5
    return rho


def entangled_lab_spin_pure(theta: float = 0.0) -> np.ndarray:
    """Pure (coin, coin-memory, spin) state after the coin interaction."""
    v = np.zeros(12, dtype=complex)
    v[np.ravel_multi_index((0, 1, 0), (2, 3, 2))] = np.sqrt(1.0 / 3.0)
    phase = np.exp(1j * theta)
    v[np.ravel_multi_index((1, 2, 0), (2, 3, 2))] = phase * np.sqrt(1.0 / 3.0)
    v[np.ravel_multi_index((1, 2, 1), (2, 3, 2))] = phase * np.sqrt(1.0 / 3.0)
    return v


def entangled_lab_spin_mixture(theta: float = 0.0) -> np.ndarray:
    """Collapse-picture (coin, coin-memory, spin) description: 1/3 vs 2/3 mixture."""
    v1 = np.zeros(12, dtype=complex)
    v1[np.ravel_multi_index((0, 1, 0), (2, 3, 2))] = 1.0
    v2 = np.zeros(12, dtype=complex)
    v2[np.ravel_multi_index((1, 2, 0), (2, 3, 2))] = np.sqrt(0.5)
    v2[np.ravel_multi_index((1, 2, 1), (2, 3, 2))] = np.sqrt(0.5)
    return (np.outer(v1, v1.conj()) / 3.0) + (2.0 / 3.0) * np.outer(v2, v2.conj())


def ok_vector() -> np.ndarray:
    v = np.zeros(6, dtype=complex)
    v[np.ravel_multi_index((0, 1), (2, 3))] = np.sqrt(0.5)
    v[np.ravel_multi_index((1, 2), (2, 3))] = -np.sqrt(0.5)
    return v


def okbar_down_vector() -> np.ndarray:
    """|okbar> (x) |down> on (coin, coin-memory, spin)."""
    v = np.zeros(12, dtype=complex)
    v[np.ravel_multi_index((0, 1, 0), (2, 3, 2))] = np.sqrt(0.5)
    v[np.ravel_multi_index((1, 2, 0), (2, 3, 2))] = -np.sqrt(0.5)
    return v


def geometric_mean_se(lengths) -> tuple[float, float]:
    """Sample mean and its standard error for episode lengths."""
    arr = np.asarray(lengths, dtype=float)
    return float(arr.mean()), float(arr.std(ddof=1) / np.sqrt(len(arr)))
