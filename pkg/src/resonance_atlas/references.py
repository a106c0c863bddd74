"""Published reference values with their locations and comparison tolerances."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerance:
    """Pass if |c - r| <= max(rel*|r|, abs) (componentwise for complex values).

    ``mode="magnitude"`` instead asserts |c| <= abs and ignores the sign.
    """
    rel: float = 0.0
    abs: float = 0.0
    mode: str = "value"

    def check(self, computed, reference) -> bool:
        if computed is None:
            return False
        c = complex(computed)
        r = complex(reference)
        if self.mode == "magnitude":
            return abs(c) <= self.abs
        ok_re = abs(c.real - r.real) <= max(self.rel * abs(r.real), self.abs)
        ok_im = abs(c.imag - r.imag) <= max(self.rel * abs(r.imag), self.abs)
        return ok_re and ok_im

    def describe(self) -> str:
        if self.mode == "magnitude":
            return f"|value| <= {self.abs:g}"
        parts = []
        if self.rel:
            parts.append(f"{self.rel:.0%} rel")
        if self.abs:
            parts.append(f"{self.abs:g} abs")
        return " or ".join(parts) or "exact"


@dataclass(frozen=True)
class Reference:
    key: str
    location: str
    quote: str
    value: complex | float
    tolerance: Tolerance
    mu: float | None = None


LAM = 0.1
T1 = Tolerance(rel=0.02, abs=2e-5)
T1_SMALL = Tolerance(abs=5e-6, mode="magnitude")
T3 = Tolerance(rel=0.02, abs=0.02)
Z_COL = Tolerance(rel=0.02, abs=1e-15)
C2_COL = Tolerance(rel=0.05, abs=1e-15)
M_COL = Tolerance(rel=0.10, abs=1e-15)

TABLE1_MU = (0.0, 1e-4, 1e-3, 3e-3, 6e-3, 6.2e-3, 6.36e-3, 6.366e-3)
TABLE1_Z = (-99, -94, -68, -34, -2.5, -1.1, 0.04, 0.001)

# 10^3 mu, 10^4 z, C2/2, M3/6, M4/24, dC1/dz
TABLE2_ROWS = (
    (0.0, -196, 0.0, 0.0, 0.0, 103.9),
    (0.1, -185.5, 1.65e-3, 3.95e-6, 1.04e-8, 105.3),
    (1.0, -135.7, 13.14e-3, 1e-4, 6.26e-7, 116),
    (3.0, -69.8, 0.038, 7.93e-4, 1e-5, 143.8),
    (6.0, -9.3, 0.099, 7.7e-3, 3.68e-4, 247.1),
    (6.2, -6.6, 0.106, 9.3e-3, 5.2e-4, 265.3),
    (6.36, -4.4, 0.111, 1.09e-2, 7.1e-4, 284.2),
    (6.3662, -4.328, 0.112, 1.10e-2, 7.17e-4, 285),
)
TABLE2_COLUMNS = (
    ("z02", "10^4 z", 1e-4, Z_COL),
    ("c2_half", "C_2/2", 1.0, C2_COL),
    ("m3_sixth", "M_3/6", 1.0, M_COL),
    ("m4_24th", "M_4/24", 1.0, M_COL),
    ("dz_c1", "d_z C_1", 1.0, C2_COL),
)

TABLE3 = (
    ("z01", "z_{0,1} & 0.13-1.97 i", 0.13 - 1.97j),
    ("z02", "z_{0,2}^1 & 0.216-1.9 i", 0.216 - 1.9j),
    ("z11", "z_{1,1} & 0.997-0.010 i", 0.997 - 0.010j),
    ("z12", "z_{1,2}^1 & 1.043-1.127 i", 1.043 - 1.127j),
)


def table1():
    out = []
    for mu, z in zip(TABLE1_MU, TABLE1_Z):
        tol = T1_SMALL if mu in (6.36e-3, 6.366e-3) else T1
        out.append(Reference(f"t1_mu{mu:g}", f"Table 1, 10^3 mu = {mu * 1e3:g}",
                             f"10^4 z_{{0.1}}(0.1,mu) ... {z:g}", z * 1e-4, tol, mu))
    return out


def table2():
    out = []
    for row in TABLE2_ROWS:
        mu = row[0] * 1e-3
        for (key, label, scale, tol), v in zip(TABLE2_COLUMNS, row[1:]):
            out.append(Reference(f"t2_{key}_mu{mu:g}", f"Table 2, 10^3 mu = {row[0]:g}, column {label}",
                                 f"{label} ... {v:g}", v * scale, tol, mu))
    return out


def table3():
    return [Reference(f"t3_{k}", "Table 3", q, v, T3, 1.0) for k, q, v in TABLE3]


def anchors():
    return [
        Reference("mu_c", "Table 2 last row", "10^3 mu ... 6.3662", 6.3662e-3, Tolerance(abs=1e-6)),
        Reference("z01_mu1", "text after Figure 2", "The physical value for mu=1 is 0.11-0.95 i",
                  0.11 - 0.95j, Tolerance(abs=0.01), 1.0),
        Reference("z01_mu2", "text after Figure 2", "z_{0,1}(0.1,2)=0.13-1.97 i",
                  0.13 - 1.97j, Tolerance(abs=0.01), 2.0),
        Reference("z11_mu0", "text after Figure 3", "z_{1,1}(0.1,0)=1.0099", 1.0099, Tolerance(abs=1e-4), 0.0),
        Reference("z11_mu1", "text after Figure 3", "z_{1,1}(0.1,1)=0.997-0.010 i",
                  0.997 - 0.010j, Tolerance(abs=2e-3), 1.0),
        Reference("z11_mu2", "text after Figure 3", "z_{1,1}(0.1,2)=0.995-0.0032 i",
                  0.995 - 0.0032j, Tolerance(abs=2e-3), 2.0),
        Reference("fig2_dashed", "Figure 2 dashed line", "the limit is not 1",
                  -1j, Tolerance(abs=0.3)),
        Reference("fig3_dashed", "Figure 3 dashed line", "moves continuously to 1",
                  1.0, Tolerance(abs=1e-3)),
        Reference("fig7_start", "text after Figure 7", "For mu=7 10^-3, z_{0,2}^1(mu)=2.8 10^-4-2.4 10^-5 i",
                  2.8e-4 - 2.4e-5j, Tolerance(rel=0.02), 7e-3),
        Reference("fig7_end", "text after Figure 7", "z_{0,2}^1(0.1,1)=0.216-1.9 i",
                  0.216 - 1.9j, T3, 1.0),
        Reference("fig8_start", "text after Figure 8", "starts from 2^-1(1+sqrt(1+8 lambda^2))=1.01962",
                  1.01962, Tolerance(abs=1e-5), 0.0),
        Reference("fig8_mu1", "text after Figure 8", "goes through 1.043-1.127 i for mu=1",
                  1.043 - 1.127j, T3, 1.0),
        Reference("correction", "error-estimate discussion, last paragraph", "whose principal term is of the order of 4 10^-4",
                  4e-4, Tolerance(abs=1e-4), 6.3662e-3),
    ]


ALL = {"1": table1, "2": table2, "3": table3, "anchors": anchors}
