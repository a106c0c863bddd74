"""Three-level atom at mu = 0: one- and two-excitation spectra of H0 and the
second-order splitting of the dressed levels by the 0-2 coupling, both from
closed formulas and from finite matrices on a truncated Fock space.

Photon states live on at most three orthonormal modes spanning f01, f12,
f02.  The truncation keeps every state whose excitation number (photons
plus atomic level index) is at most N; H0 is block diagonal in that number
and V moves it by one, so the truncated operators are exact on the blocks
they contain.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .contour import RootSettings, find_root_complex
from .errors import (
    DegenerateFrame,
    GramNotPSD,
    IllConditioned,
    RootNotConverged,
    SingularDenominator,
    TruncationInsufficient,
)

GRAM_TOL = 1e-12
EIG_TOL = 1e-9
MAX_BASIS = 20000

FAMILY_01 = "01"
FAMILY_11 = "11"
CONVENTIONS = ("printed_nfact", "n1_squared")


@dataclass(frozen=True)
class ThreeLevelModel:
    e1: float
    e2: float
    l01: float
    l12: float
    l02: float = 0.0
    s0: complex = 0j
    s1: complex = 0j
    s2: complex = 0j

    def __post_init__(self):
        if not (self.e1 > 0 and self.e2 > self.e1):
            raise ValueError("need 0 < e1 < e2")
        if min(self.l01, self.l12, self.l02) < 0:
            raise ValueError("couplings must be non-negative")
        for s in (self.s0, self.s1, self.s2):
            if abs(s) > 1 + GRAM_TOL:
                raise ValueError("overlaps must have modulus <= 1")

    def gram(self) -> np.ndarray:
        """Gram matrix (f_i, f_j) for the ordering f01, f12, f02."""
        s0, s1, s2 = complex(self.s0), complex(self.s1), complex(self.s2)
        return np.array([[1, s1, s0],
                         [np.conj(s1), 1, np.conj(s2)],
                         [np.conj(s0), s2, 1]], dtype=complex)

    def replace(self, **kw) -> "ThreeLevelModel":
        d = dict(self.__dict__)
        d.update(kw)
        return ThreeLevelModel(**d)


@dataclass(frozen=True)
class ModeFrame:
    """Coefficients of f01, f12, f02, g1 in an orthonormal 3-frame (columns e_k)."""
    f01: np.ndarray
    f12: np.ndarray
    f02: np.ndarray
    g1: np.ndarray
    g1_index: int
    degenerate: bool

    @property
    def f02_g1(self) -> complex:
        return complex(np.vdot(self.f02, self.g1))

    def gram(self) -> np.ndarray:
        F = np.stack([self.f01, self.f12, self.f02])
        return F.conj() @ F.T


def build_mode_frame(model: ThreeLevelModel) -> ModeFrame:
    """Gram-Schmidt of (f01, f12, f02) from their overlaps alone."""
    G = model.gram()
    if np.linalg.eigvalsh(G).min() < -1e-10:
        raise GramNotPSD("overlaps do not come from three unit vectors")
    s0, s1, s2 = complex(model.s0), complex(model.s1), complex(model.s2)
    f01 = np.array([1, 0, 0], dtype=complex)
    r1 = 1.0 - abs(s1) ** 2
    degenerate = r1 <= GRAM_TOL
    if degenerate:
        f12 = f01.copy()
        r = 1.0 - abs(s0) ** 2
        if r <= GRAM_TOL:
            raise DegenerateFrame("f01, f12 and f02 are collinear")
        f02 = np.array([s0, math.sqrt(r), 0], dtype=complex)
        g1_index = 1
    else:
        b1 = math.sqrt(r1)
        f12 = np.array([s1, b1, 0], dtype=complex)
        # (f12, f02) = conj(s2)
        b = (np.conj(s2) - np.conj(s1) * s0) / b1
        c2 = 1.0 - abs(s0) ** 2 - abs(b) ** 2
        if c2 < -1e-10:
            raise GramNotPSD("overlaps do not come from three unit vectors")
        f02 = np.array([s0, b, math.sqrt(max(c2, 0.0))], dtype=complex)
        # when f02 lies in span(f01, f12), e3 is still orthogonal to both
        g1_index = 2
    g1 = np.zeros(3, dtype=complex)
    g1[g1_index] = 1.0
    return ModeFrame(f01, f12, f02, g1, g1_index, degenerate)


# ---------------------------------------------------------------------------
# closed forms


def zeta_01(model: ThreeLevelModel) -> float:
    return 0.5 * (model.e1 - math.sqrt(model.e1 ** 2 + 4 * model.l01 ** 2))


def zeta_11(model: ThreeLevelModel) -> float:
    return 0.5 * (model.e1 + math.sqrt(model.e1 ** 2 + 4 * model.l01 ** 2))


def _zeta(model, family):
    if family == FAMILY_01:
        return zeta_01(model)
    if family == FAMILY_11:
        return zeta_11(model)
    raise ValueError(f"family must be {FAMILY_01!r} or {FAMILY_11!r}")


def _dressed_coeffs(zeta, l01):
    """Normalised (|1,Omega>, |0,f01>) coefficients of the dressed state."""
    if zeta == 0:
        return np.array([0.0, -1.0])
    n1 = 1.0 / math.sqrt(1.0 + l01 ** 2 / zeta ** 2)
    return np.array([n1, n1 * l01 / zeta])


def sector1_matrix(model: ThreeLevelModel) -> np.ndarray:
    """H0 on the one-excitation sector, basis |1,Omega>, |0,f01>, |0,g0>."""
    return np.array([[model.e1, model.l01, 0.0],
                     [model.l01, 0.0, 0.0],
                     [0.0, 0.0, 0.0]])


def prop41_spectrum(model: ThreeLevelModel):
    """[(eigenvalue, coefficients in |1,Omega>, |0,f01>, |0,g0>)].

    The middle entry is absent when f01 = f12.
    """
    z1, z3 = zeta_01(model), zeta_11(model)
    out = []
    c = _dressed_coeffs(z1, model.l01)
    out.append((z1, np.array([c[0], c[1], 0.0])))
    if abs(model.s1) < 1 - GRAM_TOL:
        out.append((0.0, np.array([0.0, 0.0, 1.0])))
    c = _dressed_coeffs(z3, model.l01)
    out.append((z3, np.array([c[0], c[1], 0.0])))
    return out


def b2_matrix(model: ThreeLevelModel) -> np.ndarray:
    """The 6x6 matrix of H0 on the two-excitation sector as printed, basis
    |2,O>, |1,f12>, |1,f01>, |0,f12 v f01>, |0,f01 v f01>, |0,f12 v f12>."""
    e1, e2, a, b = model.e1, model.e2, model.l01, model.l12
    s1 = complex(model.s1)
    r2 = math.sqrt(2.0)
    return np.array([
        [e2, b, s1 * b, 0, 0, 0],
        [b, e1, 0, a / r2, 0, r2 * s1 * a],
        [0, 0, e1, s1 * a / r2, r2 * a, 0],
        [0, r2 * a, 0, 0, 0, 0],
        [0, 0, r2 * a, 0, 0, 0],
        [0, 0, 0, 0, 0, 0],
    ], dtype=complex)


def _b2_poly(model: ThreeLevelModel) -> np.poly1d:
    e1, e2, a2, b2 = model.e1, model.e2, model.l01 ** 2, model.l12 ** 2
    s = abs(model.s1) ** 2
    Z = np.poly1d([1.0, 0.0])
    inner = Z * (Z - e1) * (Z - e2) - 3 * a2 * (Z - e2) - b2 * Z
    return Z * (Z - e1) * inner + Z * a2 * (2 * a2 + (2 - s) * b2) - 2 * e2 * a2 * a2


def b2_charpoly(model: ThreeLevelModel, zeta) -> complex:
    """zeta times the printed quintic; the extra factor is the root 0."""
    return complex(zeta) * complex(_b2_poly(model)(complex(zeta)))


def b2_second_order(model: ThreeLevelModel):
    e1, e2, a2, b2 = model.e1, model.e2, model.l01 ** 2, model.l12 ** 2
    if e1 == 0 or e1 == e2:
        raise SingularDenominator("need e1 != 0 and e1 != e2")
    return [0.0, -3 * a2 / e1, e1, e1 + 3 * a2 / e1 + b2 / (e1 - e2), e2 + b2 / (e2 - e1)]


def b2_second_order_consistent(model: ThreeLevelModel):
    """Second-order roots of the printed quintic, keeping its lam^4 terms.

    Near 0 the quintic reduces to -e2 (e1 z + a^2)(e1 z + 2 a^2); near e1,
    u = e1 (z - e1) solves u^2 - B u + C = 0.  The printed list matches these
    only in the sums of each pair.
    """
    e1, e2, a2, b2 = model.e1, model.e2, model.l01 ** 2, model.l12 ** 2
    if e1 == 0 or e1 == e2:
        raise SingularDenominator("need e1 != 0 and e1 != e2")
    d = e1 - e2
    s = abs(model.s1) ** 2
    B = 3 * a2 + e1 * b2 / d
    C = 2 * a2 * a2 + (2 - s) * e1 * a2 * b2 / d
    r = math.sqrt(max(B * B - 4 * C, 0.0))
    lo, hi = sorted(((B - r) / 2, (B + r) / 2))
    return [-a2 / e1, -2 * a2 / e1, e1 + lo / e1, e1 + hi / e1, e2 + b2 / (e2 - e1)]


def b2_spectrum(model: ThreeLevelModel, settings: RootSettings = RootSettings(1e-14, 1e-12, 80)):
    """0 followed by the five roots of the printed quintic, seeded from the
    second-order values.  Falls back to polished companion-matrix roots when
    two seeds land on the same root."""
    if abs(model.s1) >= 1 - GRAM_TOL:
        raise DegenerateFrame("the two-excitation basis needs f01 != f12")
    p = _b2_poly(model)
    dp = p.deriv()
    fn = lambda z: complex(p(z))
    roots = []
    ok = True
    for seed in b2_second_order(model):
        try:
            r = find_root_complex(fn, complex(seed), settings).root
        except RootNotConverged:
            ok = False
            break
        roots.append(r)
    if ok:
        for i, j in itertools.combinations(range(5), 2):
            if abs(roots[i] - roots[j]) < 1e-9 * (1 + abs(roots[i])):
                ok = False
    if not ok:
        roots = []
        for r in np.roots(p.coeffs):
            for _ in range(5):
                d = dp(r)
                if d == 0:
                    break
                r = r - p(r) / d
            roots.append(complex(r))
        roots.sort(key=lambda z: z.real)
        seeds = b2_second_order(model)
        order = np.argsort(np.argsort(seeds))
        roots = [roots[k] for k in order]
    roots = [r.real if abs(r.imag) < 1e-10 * (1 + abs(r)) else r for r in roots]
    return [0.0] + roots


def kato_A(model: ThreeLevelModel, n: int, family: str = FAMILY_01) -> float:
    """A^{(n)} with zeta of the chosen family (the printed rule for z11)."""
    if n < 0:
        raise ValueError("n must be non-negative")
    z = _zeta(model, family)
    a2, b2 = model.l01 ** 2, model.l12 ** 2
    den = z * z * (b2 * z + a2 * (z - model.e2))
    if den == 0:
        raise SingularDenominator("lambda12^2 zeta + lambda01^2 (zeta - e2) vanishes")
    frame = build_mode_frame(model)
    w = n * abs(frame.f02_g1) ** 2
    if frame.degenerate:
        w += abs(model.s0) ** 2
    return a2 * a2 * w / den


def kato_z2(model: ThreeLevelModel, family: str, n: int, convention: str = "printed_nfact") -> float:
    """zeta + lam02^2 (1 + c lam01^2/zeta^2)^{-1} A, with c = n! as printed
    or c = 1 (the dressed-state normalisation N1^2)."""
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    z = _zeta(model, family)
    c = math.factorial(n) if convention == "printed_nfact" else 1.0
    return z + model.l02 ** 2 * kato_A(model, n, family) / (1.0 + c * model.l01 ** 2 / z ** 2)


# ---------------------------------------------------------------------------
# truncated Fock space


@dataclass(frozen=True)
class TruncatedFock:
    modes: int
    N: int
    basis: tuple
    index: dict

    @property
    def dim(self):
        return len(self.basis)


def build_fock(N: int, modes: int = 3, cap: int = MAX_BASIS) -> TruncatedFock:
    """States (level, occupations) with level + total photons <= N."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if not 1 <= modes <= 3:
        raise ValueError("mode count must be 1, 2 or 3")
    size = sum(math.comb(N - a + modes, modes) for a in range(3) if N - a >= 0)
    if size > cap:
        raise ValueError(f"basis size {size} exceeds cap {cap}")
    basis = []
    for a in range(3):
        for tot in range(0, N - a + 1):
            for occ in _compositions(tot, modes):
                basis.append((a, occ))
    basis = tuple(basis)
    return TruncatedFock(modes, N, basis, {s: i for i, s in enumerate(basis)})


def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for k in range(total, -1, -1):
        for rest in _compositions(total - k, parts - 1):
            yield (k,) + rest


def _lowering(fock: TruncatedFock, frm: int, to: int, f: np.ndarray) -> np.ndarray:
    """|to><frm| (x) c(conj f) on the truncated basis."""
    M = np.zeros((fock.dim, fock.dim), dtype=complex)
    for j, (a, occ) in enumerate(fock.basis):
        if a != frm:
            continue
        for k in range(fock.modes):
            if occ[k] == 0 or f[k] == 0:
                continue
            new = list(occ)
            new[k] -= 1
            i = fock.index.get((to, tuple(new)))
            if i is not None:
                M[i, j] += np.conj(f[k]) * math.sqrt(occ[k])
    return M


def build_truncated_hamiltonian(model: ThreeLevelModel, N: int, include_v: bool = True,
                                frame: ModeFrame | None = None, modes: int = 3):
    """(fock, H) with H = H0 (+ lam02 V when ``include_v``)."""
    frame = frame or build_mode_frame(model)
    fock = build_fock(N, modes)
    f01, f12, f02 = (v[:modes] for v in (frame.f01, frame.f12, frame.f02))
    H = np.diag([(0.0, model.e1, model.e2)[a] for a, _ in fock.basis]).astype(complex)
    A = _lowering(fock, 0, 1, f01)
    B = _lowering(fock, 1, 2, f12)
    H += model.l01 * (A + A.conj().T) + model.l12 * (B + B.conj().T)
    if include_v:
        H += model.l02 * v_matrix(fock, frame)
    return fock, H


def v_matrix(fock: TruncatedFock, frame: ModeFrame) -> np.ndarray:
    C = _lowering(fock, 0, 2, frame.f02[:fock.modes])
    return C + C.conj().T


def brute_spectrum(matrix: np.ndarray) -> np.ndarray:
    M = np.asarray(matrix)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("square matrix required")
    if np.max(np.abs(M - M.conj().T), initial=0.0) > 1e-12 * max(1.0, np.abs(M).max(initial=0.0)):
        raise ValueError("matrix is not Hermitian")
    return np.linalg.eigvalsh(M)


def excitation_numbers(fock: TruncatedFock) -> np.ndarray:
    return np.array([a + sum(occ) for a, occ in fock.basis])


def sector_block(fock: TruncatedFock, H: np.ndarray, k: int, modes_used: int | None = None):
    """Rows/cols of excitation number k (optionally only photons in the
    first ``modes_used`` modes)."""
    idx = [i for i, (a, occ) in enumerate(fock.basis)
           if a + sum(occ) == k and (modes_used is None or sum(occ[modes_used:]) == 0)]
    return H[np.ix_(idx, idx)]


# ---------------------------------------------------------------------------
# finite-matrix Kato perturbation


def dressed_state(model: ThreeLevelModel, family: str, n: int, fock: TruncatedFock,
                  frame: ModeFrame) -> np.ndarray:
    """(n!)^{-1/2} c*(g1)^n applied to the dressed one-excitation state."""
    z = _zeta(model, family)
    c1, c0 = _dressed_coeffs(z, model.l01)
    gi = frame.g1_index
    v = np.zeros(fock.dim, dtype=complex)
    occ1 = [0, 0, 0][:fock.modes]
    occ1[gi] = n
    occ0 = list(occ1)
    occ0[0] += 1
    try:
        v[fock.index[(1, tuple(occ1))]] = c1
        # (n!)^{-1/2} c*(g1)^n |f01> has norm 1 when g1 is orthogonal to f01
        v[fock.index[(0, tuple(occ0))]] = c0
    except KeyError as exc:
        raise TruncationInsufficient(f"N={fock.N} too small for n={n}") from exc
    return v


class _KatoData:
    def __init__(self, model, family, n, N):
        if N < n + 2:
            raise TruncationInsufficient("need N >= n + 2 to hold V applied to the state")
        self.frame = build_mode_frame(model)
        self.zeta = _zeta(model, family)
        self.fock, self.H0 = build_truncated_hamiltonian(model, N, include_v=False, frame=self.frame)
        self.V = v_matrix(self.fock, self.frame)
        self.phi = dressed_state(model, family, n, self.fock, self.frame)
        E, U = np.linalg.eigh(self.H0)
        near = np.abs(E - self.zeta) <= EIG_TOL * max(1.0, abs(self.zeta))
        self.P0 = U[:, near] @ U[:, near].conj().T
        far = ~near
        gaps = self.zeta - E[far]
        if gaps.size and np.min(np.abs(gaps)) < 1e-8:
            raise IllConditioned("zeta is nearly degenerate with the complementary spectrum")
        self._U = U[:, far]
        self._g = gaps

    def qtilde(self, x):
        return self._U @ ((self._U.conj().T @ x) / self._g)


def _kato_raw(model, family, n, N):
    d = _KatoData(model, family, n, N)
    vphi = d.V @ d.phi
    u = d.qtilde(vphi)
    shift = complex(np.vdot(vphi, u))
    k = 1.0 - model.l02 ** 2 * float(np.vdot(u, u).real)
    l = d.zeta * k + model.l02 ** 2 * shift
    return d, shift, k, l


def kato_matrix_second_order(model: ThreeLevelModel, family: str, n: int, N: int | None = None,
                             raw: bool = False, check: bool = True):
    """zeta + lam02^2 (V phi, Qt V phi) from finite matrices.

    With ``raw`` the unexpanded ratio l/k of the second-order K and L
    operators is returned instead.  ``check`` repeats the computation at
    N + 1 and raises when the value moves by more than 1e-9.
    """
    N = max(5, n + 3) if N is None else N
    d, shift, k, l = _kato_raw(model, family, n, N)
    val = l / k if raw else d.zeta + model.l02 ** 2 * shift
    if check:
        _, s2, k2, l2 = _kato_raw(model, family, n, N + 1)
        val2 = l2 / k2 if raw else d.zeta + model.l02 ** 2 * s2
        if abs(val2 - val) > 1e-9:
            raise TruncationInsufficient(f"result moved by {abs(val2 - val):.2e} from N={N} to N={N + 1}")
    return float(np.real(val))


def kato_vector_second_order(model: ThreeLevelModel, family: str, n: int, N: int | None = None):
    """(fock, chi) with chi = P(lam02) phi through second order in lam02."""
    N = max(5, n + 3) if N is None else N
    d = _KatoData(model, family, n, N)
    lam = model.l02
    vphi = d.V @ d.phi
    u = d.qtilde(vphi)
    second = d.qtilde(d.V @ u) - d.P0 @ (d.V @ d.qtilde(u))
    return d.fock, d.phi + lam * u + lam * lam * second
