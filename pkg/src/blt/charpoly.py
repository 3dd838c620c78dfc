"""Characteristic quartics of the western/eastern boundary-layer modes.

Each tangential Fourier mode of the fourth-order layer equations decays (or
grows) like exp(-lambda*X) where lambda solves a quartic with complex
coefficients.  This module builds those quartics in monomial form, finds all
four roots with a Durand-Kerner iteration plus Newton polishing, classifies
them by the sign of the real part, and certifies simplicity over parameter
sweeps.

Conventions: `alpha` is the coast slope, `xi` the tangential frequency.  The
western quartic is  -lam - ((1+a^2)lam^2 + 2i*a*xi*lam - xi^2)^2  and the
eastern one is its mirror under lam -> -lam (up to overall sign).
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "QuarticCoeffs",
    "ClassifiedRoots",
    "CertReport",
    "NonConvergence",
    "DegenerateClassification",
    "CertFailure",
    "western_coeffs",
    "eastern_coeffs",
    "solve_quartic",
    "solve_quartic_batch",
    "positive_roots",
    "certify_simple_offaxis",
]

ZERO_ROOT_TOL = 1e-10


class NonConvergence(RuntimeError):
    """Root iteration failed to reach the requested residual tolerance."""


class DegenerateClassification(RuntimeError):
    """Root counts violate the expected sign split."""


class CertFailure(RuntimeError):
    """Certification sweep found an offending (alpha, xi) pair."""

    def __init__(self, failures):
        self.failures = failures
        super().__init__(f"{len(failures)} offending (alpha, xi) pairs")


@dataclass(frozen=True)
class QuarticCoeffs:
    """Monomial coefficients c0 + c1*lam + ... + c4*lam^4 of a side's quartic."""

    c0: complex
    c1: complex
    c2: complex
    c3: complex
    c4: complex
    side: str = "west"
    alpha: float = 0.0
    xi: float = 0.0

    def coeff_array(self):
        return np.array([self.c0, self.c1, self.c2, self.c3, self.c4])

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=complex)
        return self.c0 + lam * (self.c1 + lam * (self.c2 + lam * (self.c3 + lam * self.c4)))

    def derivative(self, lam):
        lam = np.asarray(lam, dtype=complex)
        return self.c1 + lam * (2 * self.c2 + lam * (3 * self.c3 + lam * 4 * self.c4))


@dataclass
class ClassifiedRoots:
    """All four roots split by sign of the real part.

    `zero` is only populated at xi = 0 where lam = 0 is an exact root; any
    root with |Re| <= ZERO_ROOT_TOL away from xi = 0 raises
    DegenerateClassification instead.
    """

    pos: list = field(default_factory=list)
    neg: list = field(default_factory=list)
    zero: complex | None = None
    min_pairwise_gap: float = np.inf
    max_residual: float = 0.0

    def all_roots(self):
        roots = list(self.pos) + list(self.neg)
        if self.zero is not None:
            roots.append(self.zero)
        return sorted(roots, key=lambda z: (z.real, z.imag))


@dataclass
class CertReport:
    sweep: dict
    min_gap: float
    min_abs_re: float
    failures: list

    @property
    def passed(self):
        return not self.failures

    def to_json_dict(self):
        return {
            "sweep": self.sweep,
            "min_gap": self.min_gap,
            "min_abs_re": self.min_abs_re,
            "failures": [list(f) for f in self.failures],
        }


def western_coeffs(alpha, xi):
    """Quartic of the western layer: -lam - ((1+a^2)lam^2 + 2i*a*xi*lam - xi^2)^2."""
    a2 = 1.0 + alpha * alpha
    b = 2j * alpha * xi
    c = -xi * xi
    # square of (a2*lam^2 + b*lam + c), negated, minus lam
    return QuarticCoeffs(
        c0=-c * c,
        c1=-1.0 - 2.0 * b * c,
        c2=-(b * b + 2.0 * a2 * c),
        c3=-2.0 * a2 * b,
        c4=-a2 * a2,
        side="west",
        alpha=alpha,
        xi=xi,
    )


def eastern_coeffs(alpha, xi):
    """Quartic of the eastern layer: -mu + ((1+a^2)mu^2 - 2i*a*xi*mu - xi^2)^2.

    Equals -P_west(-mu) coefficientwise, so eastern roots are the negated
    western ones.
    """
    a2 = 1.0 + alpha * alpha
    b = -2j * alpha * xi
    c = -xi * xi
    return QuarticCoeffs(
        c0=c * c,
        c1=-1.0 + 2.0 * b * c,
        c2=b * b + 2.0 * a2 * c,
        c3=2.0 * a2 * b,
        c4=a2 * a2,
        side="east",
        alpha=alpha,
        xi=xi,
    )


def _coeffs_for(side, alpha, xi):
    if side == "west":
        return western_coeffs(alpha, xi)
    if side == "east":
        return eastern_coeffs(alpha, xi)
    raise ValueError(f"unknown side {side!r}")


def _durand_kerner(coeffs, max_iter=120, stop=1e-15):
    """Simultaneous iteration for all roots of monic quartics.

    coeffs: array (..., 5) of c0..c4 with c4 != 0.  Returns (..., 4) roots.
    Vectorised over leading axes so parameter sweeps solve in one pass.
    """
    c = np.asarray(coeffs, dtype=complex)
    monic = c / c[..., 4:5]
    a = monic[..., :4]  # monic: lam^4 + a3 lam^3 + a2 lam^2 + a1 lam + a0

    # initial guesses on a circle of radius given by the Cauchy bound
    radius = 1.0 + np.max(np.abs(a), axis=-1)
    angles = np.exp(2j * np.pi * (np.arange(4) + 0.25) / 4)
    lam = radius[..., None] * angles

    def poly(z):
        return a[..., 0] + z * (a[..., 1] + z * (a[..., 2] + z * (a[..., 3] + z)))

    for _ in range(max_iter):
        move = np.zeros_like(lam)
        for i in range(4):
            zi = lam[..., i]
            denom = np.ones_like(zi)
            for j in range(4):
                if j != i:
                    denom = denom * (zi - lam[..., j])
            move[..., i] = poly(zi) / denom
        lam = lam - move
        if np.max(np.abs(move)) < stop:
            break

    # Newton polish (two steps) against the original, unscaled polynomial
    cb = [c[..., k, None] for k in range(5)]
    for _ in range(2):
        p = cb[0] + lam * (cb[1] + lam * (cb[2] + lam * (cb[3] + lam * cb[4])))
        dp = cb[1] + lam * (2 * cb[2] + lam * (3 * cb[3] + lam * 4 * cb[4]))
        safe = np.abs(dp) > 0
        lam = np.where(safe, lam - np.where(safe, p, 0) / np.where(safe, dp, 1), lam)
    return lam


def solve_quartic_batch(coeff_arrays):
    """Roots of many quartics at once; coeff_arrays has shape (..., 5)."""
    lam = _durand_kerner(coeff_arrays)
    order = np.lexsort((lam.imag, lam.real), axis=-1)
    return np.take_along_axis(lam, order, axis=-1)


def solve_quartic(q, tol=1e-10):
    """Find and classify the four roots of one quartic.

    Residual test per root: |P(lam)| <= tol * max|c_k| * max(1, |lam|)^4.
    Classification: 2/2 split for xi != 0; one exact-zero root at xi = 0.
    """
    if not 0.0 < tol <= 1e-6:
        raise ValueError("tol must lie in (0, 1e-6]")
    lam = solve_quartic_batch(q.coeff_array()[None, :])[0]

    scale = np.max(np.abs(q.coeff_array()))
    resid = np.abs(q(lam)) / (scale * np.maximum(1.0, np.abs(lam)) ** 4)
    if np.max(resid) > tol:
        raise NonConvergence(f"root residual {np.max(resid):.3e} exceeds {tol:.1e}")

    gaps = [abs(lam[i] - lam[j]) for i in range(4) for j in range(i + 1, 4)]
    out = ClassifiedRoots(min_pairwise_gap=min(gaps), max_residual=float(np.max(resid)))

    for z in lam:
        z = complex(z)
        if abs(z.real) <= ZERO_ROOT_TOL:
            if q.xi == 0.0 and abs(z) <= ZERO_ROOT_TOL:
                out.zero = z
                continue
            raise DegenerateClassification(
                f"near-imaginary root {z} at (alpha={q.alpha}, xi={q.xi})"
            )
        (out.pos if z.real > 0 else out.neg).append(z)

    out.pos.sort(key=lambda z: (z.real, z.imag))
    out.neg.sort(key=lambda z: (z.real, z.imag))

    if q.xi != 0.0 and (len(out.pos) != 2 or len(out.neg) != 2):
        raise DegenerateClassification(
            f"sign split {len(out.pos)}/{len(out.neg)} at (alpha={q.alpha}, xi={q.xi})"
        )
    return out


def positive_roots(side, alpha, xi, tol=1e-10):
    """The two decay rates with Re > 0 (west), or Re >= 0 including the slow
    eastern mode (east), ordered by (Re, Im).

    At xi = 0 the western pair is genuinely positive; the eastern pair is
    (0, (1+a^2)^(-2/3)) with the zero root standing in for the slow mode.
    """
    cls = solve_quartic(_coeffs_for(side, alpha, xi), tol=tol)
    roots = list(cls.pos)
    if cls.zero is not None and side == "east":
        roots.append(cls.zero)
    roots.sort(key=lambda z: (z.real, z.imag))
    if len(roots) != 2:
        raise DegenerateClassification(
            f"expected two {side}ern decaying modes, got {len(roots)}"
        )
    return roots[0], roots[1]


def negative_roots(side, alpha, xi, tol=1e-10):
    """The two roots with Re < 0 (west at xi=0: the real negative root and 0)."""
    cls = solve_quartic(_coeffs_for(side, alpha, xi), tol=tol)
    roots = list(cls.neg)
    if cls.zero is not None and side == "west":
        roots.append(cls.zero)
    roots.sort(key=lambda z: (z.real, z.imag))
    if len(roots) != 2:
        raise DegenerateClassification(
            f"expected two {side}ern growing modes, got {len(roots)}"
        )
    return roots[0], roots[1]


def certify_simple_offaxis(alpha_range=(-2.0, 2.0), xi_range=(0.01, 50.0),
                           samples=(200, 200), side="west", tol=1e-10,
                           gap_floor=1e-6, re_floor=1e-8):
    """Sweep (alpha, xi) and certify simple, off-axis roots with a 2/2 split.

    xi is sampled over +/-[xi_range] (0 excluded).  Returns a CertReport; a
    nonempty failure list means some pair violated the gap/Re floors or the
    split.  Raises CertFailure only through `report.raise_if_failed()` so the
    caller can inspect partial results.
    """
    alphas = np.linspace(alpha_range[0], alpha_range[1], samples[0])
    # cell-interior sampling: the slow root's |Re| ~ xi^4 sits exactly on the
    # 1e-8 floor at xi = 0.01, so the endpoints themselves are degenerate by
    # construction rather than in substance
    xis_half = np.geomspace(xi_range[0], xi_range[1], samples[1] // 2 + 2)[1:-1]
    xis = np.concatenate([-xis_half[::-1], xis_half])
    if np.any(xis == 0.0):
        raise ValueError("xi sweep must exclude 0")

    A, XI = np.meshgrid(alphas, xis, indexing="ij")
    a2 = 1.0 + A * A
    b = (2j if side == "west" else -2j) * A * XI
    c = -XI * XI
    sgn = -1.0 if side == "west" else 1.0
    coeffs = np.stack(
        [sgn * c * c,
         -1.0 + sgn * 2.0 * b * c,
         sgn * (b * b + 2.0 * a2 * c),
         sgn * 2.0 * a2 * b,
         sgn * a2 * a2],
        axis=-1,
    )
    lam = solve_quartic_batch(coeffs)

    scale = np.max(np.abs(coeffs), axis=-1)
    cb = [coeffs[..., k, None] for k in range(5)]
    p = cb[0] + lam * (cb[1] + lam * (cb[2] + lam * (cb[3] + lam * cb[4])))
    resid = np.abs(p) / (scale[..., None] * np.maximum(1.0, np.abs(lam)) ** 4)

    gap = np.full(A.shape, np.inf)
    for i in range(4):
        for j in range(i + 1, 4):
            gap = np.minimum(gap, np.abs(lam[..., i] - lam[..., j]))
    abs_re = np.min(np.abs(lam.real), axis=-1)
    npos = np.sum(lam.real > 0, axis=-1)

    bad = (gap <= gap_floor) | (abs_re <= re_floor) | (npos != 2) | (np.max(resid, axis=-1) > tol)
    failures = [(float(A[i, j]), float(XI[i, j])) for i, j in zip(*np.nonzero(bad))]

    return CertReport(
        sweep={
            "side": side,
            "alpha_range": list(alpha_range),
            "xi_range": list(xi_range),
            "samples": list(samples),
        },
        min_gap=float(np.min(gap)),
        min_abs_re=float(np.min(abs_re)),
        failures=failures,
    )
