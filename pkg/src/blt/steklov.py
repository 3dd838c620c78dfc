"""Poincare-Steklov symbols of the half-space layer problems.

The operator maps interface data (psi0, psi1) to the second/third-order
boundary expressions of the interior solution -- the "transparent" boundary
condition used to truncate the layer domain at X = M.  Per frequency it is a
2x2 matrix assembled from the decaying-mode rates:

    west rows:  (1+a^2) Lap_w Psi |_0
                [-(1+a^2) dX + 2a dY] Lap_w Psi |_0  +  Psi/2 |_0
    east rows:  -(1+a^2) Lap_e Psi |_0
                [-(1+a^2) dX + 2a dY] Lap_e Psi |_0  +  Psi/2 |_0

With these orientations the low-frequency corner entries are the fixed
points m30 -> -1/2 (west) and n30 -> +1/2, n31 -> -(1+a^2)^(2/3) (east).

Sign structure (energy identities, verifiable to round-off):

    west:  <rho3, psi0> + <rho2, psi1>              = -||Lap_w Psi||^2 <= 0
    east:  <rho3, psi0> - <rho2, psi1> - ||psi0||^2 = -||Lap_e Psi||^2 <= 0

The eastern pairing carries the extra transport boundary term ||psi0||^2
because the first-order part of the eastern operator has the opposite sign;
the quadratic form itself is positive there (hence "positivity").
"""

from dataclasses import dataclass, field

import numpy as np

from . import halfspace as hs
from ._fit import FitDegenerate, loglog_fit
from .fields import BoundaryTrace

__all__ = [
    "SignViolation",
    "SteklovSymbol",
    "symbol",
    "symbol_table",
    "apply",
    "negativity_check",
    "derivative_growth",
    "high_pass_kernel_tail",
    "nonlinear_rho3_extra",
]


class SignViolation(RuntimeError):
    def __init__(self, message, sample=None):
        super().__init__(message)
        self.sample = sample


def _entries(side, alpha, xis):
    """Closed-form symbol entries from the two decaying rates."""
    xis = np.asarray(xis, dtype=float)
    lam1, lam2 = hs.mode_rates(side, alpha, xis)
    a2 = 1.0 + alpha * alpha
    if side == "west":
        m20 = -a2 * (a2 * lam1 * lam2 + xis**2)
        m21 = -a2 * (a2 * (lam1 + lam2) + 2j * alpha * xis)
        m30 = -0.5 * (2 * a2 * lam1 * lam2 * (a2 * (lam1 + lam2) + 4j * alpha * xis)
                      + 4j * alpha * xis**3 - 1.0)
        m31 = ((5 * alpha**2 + 1) * xis**2
               - a2 * (a2 * (lam1**2 + lam1 * lam2 + lam2**2)
                       + 4j * alpha * xis * (lam1 + lam2)))
    elif side == "east":
        m20 = a2 * (a2 * lam1 * lam2 + xis**2)
        m21 = a2 * (a2 * (lam1 + lam2) - 2j * alpha * xis)
        m30 = -0.5 * (2 * a2**2 * lam1 * lam2 * (lam1 + lam2)
                      + 4j * alpha * xis**3 - 1.0)
        m31 = -(a2**2 * (lam1**2 + lam1 * lam2 + lam2**2)
                + (3 * alpha**2 - 1) * xis**2)
    else:
        raise ValueError(f"unknown side {side!r}")
    return m20, m21, m30, m31


def direct_entries(side, alpha, xis):
    """Same entries assembled from the defining Dirichlet solves (oracle path).

    Solves for the mode amplitudes with unit data and applies the boundary
    operator symbols directly; equals _entries up to round-off.
    """
    xis = np.asarray(xis, dtype=float)
    a2 = 1.0 + alpha * alpha
    one = np.ones_like(xis, dtype=complex)
    zero = np.zeros_like(xis, dtype=complex)
    out = []
    for p0, p1 in ((one, zero), (zero, one)):
        A1, A2, l1, l2 = hs.mode_coefficients(side, alpha, xis, p0, p1)
        if side == "west":
            d1 = a2 * l1**2 + 2j * alpha * xis * l1 - xis**2
            d2 = a2 * l2**2 + 2j * alpha * xis * l2 - xis**2
            row2 = a2 * (A1 * d1 + A2 * d2)
        else:
            d1 = a2 * l1**2 - 2j * alpha * xis * l1 - xis**2
            d2 = a2 * l2**2 - 2j * alpha * xis * l2 - xis**2
            row2 = -a2 * (A1 * d1 + A2 * d2)
        row3 = (A1 * (a2 * l1 + 2j * alpha * xis) * d1
                + A2 * (a2 * l2 + 2j * alpha * xis) * d2) + 0.5 * p0
        out.append((row2, row3))
    (m20, m30), (m21, m31) = out
    return m20, m21, m30, m31


def symbol(side, alpha, xi):
    """2x2 complex symbol matrix [[m20, m21], [m30, m31]] at one frequency."""
    m20, m21, m30, m31 = _entries(side, alpha, np.array([float(xi)]))
    return np.array([[m20[0], m21[0]], [m30[0], m31[0]]])


@dataclass
class SteklovSymbol:
    """Symbol tabulated over a frequency set, with conjugation symmetry
    M(-xi) = conj(M(xi)) built in."""

    side: str
    alpha: float
    xis: np.ndarray
    entries: np.ndarray = field(default=None, repr=False)  # (4, n)

    def __post_init__(self):
        if self.entries is None:
            self.entries = np.stack(_entries(self.side, self.alpha, self.xis))

    def at(self, xi):
        if xi >= 0:
            idx = np.argmin(np.abs(self.xis - xi))
            e = self.entries[:, idx]
        else:
            idx = np.argmin(np.abs(self.xis + xi))
            e = np.conj(self.entries[:, idx])
        return np.array([[e[0], e[1]], [e[2], e[3]]])

    def to_csv_rows(self):
        rows = []
        for k, xi in enumerate(self.xis):
            e = self.entries[:, k]
            rows.append([xi] + [v for c in e for v in (c.real, c.imag)])
        return rows


def symbol_table(side, alpha, grid):
    return SteklovSymbol(side, alpha, grid.xi)


def apply(side, alpha, trace, grid):
    """Apply the operator to a trace: rfft multiply by the symbol, inverse.

    Returns (rho2, rho3) as real arrays on the Y grid.
    """
    m20, m21, m30, m31 = _entries(side, alpha, grid.xi)
    p0 = grid.rfft(trace.psi0)
    p1 = grid.rfft(trace.psi1)
    rho2 = grid.irfft(m20 * p0 + m21 * p1)
    rho3 = grid.irfft(m30 * p0 + m31 * p1)
    return rho2, rho3


def _pair(grid, fhat, ghat):
    """Real L2(0, L) pairing from rfft arrays."""
    N, L = grid.N, grid.L
    w = np.full(len(fhat), 2.0)
    w[0] = 1.0
    if N % 2 == 0:
        w[-1] = 1.0
    return float(np.real(np.sum(w * fhat * np.conj(ghat))) * L / N**2)


def sign_functional(side, alpha, trace, grid):
    """Side-appropriate sign-definite pairing and its energy-identity twin.

    Returns (S, identity_gap): S <= 0 up to round-off, and S equals the
    negative squared layer dissipation -||Lap Psi||^2, whose independent
    mode-sum evaluation is returned through the gap |S + ||Lap Psi||^2|.
    """
    p0 = grid.rfft(trace.psi0)
    p1 = grid.rfft(trace.psi1)
    m20, m21, m30, m31 = _entries(side, alpha, grid.xi)
    r2 = m20 * p0 + m21 * p1
    r3 = m30 * p0 + m31 * p1
    if side == "west":
        S = _pair(grid, r3, p0) + _pair(grid, r2, p1)
    else:
        # variational third row flips the tangential term of the printed
        # symbol: rho3_var = rho3 + 4i*alpha*xi/(1+alpha^2) * rho2 per mode
        r3v = r3 + (4j * alpha * grid.xi / (1.0 + alpha * alpha)) * r2
        S = _pair(grid, r3v, p0) - _pair(grid, r2, p1) - _pair(grid, p0, p0)

    # independent dissipation: int_0^inf |Lap Psi_hat|^2 dX mode by mode
    a2 = 1.0 + alpha * alpha
    A1, A2, l1, l2 = hs.mode_coefficients(side, alpha, grid.xi, p0, p1)
    sgn = 1.0 if side == "west" else -1.0
    d1 = a2 * l1**2 + sgn * 2j * alpha * grid.xi * l1 - grid.xi**2
    d2 = a2 * l2**2 + sgn * 2j * alpha * grid.xi * l2 - grid.xi**2
    per_mode = hs.mode_l2_integral(A1, A2, l1, l2, weight1=d1, weight2=d2)
    w = np.full(len(p0), 2.0)
    w[0] = 1.0
    if grid.N % 2 == 0:
        w[-1] = 1.0
    dissipation = float(np.sum(w * per_mode) * grid.L / grid.N**2)
    return S, abs(S + dissipation)


@dataclass
class SignReport:
    side: str
    alpha: float
    n_samples: int
    worst_value: float
    worst_identity_gap: float
    scale: float

    @property
    def passed(self):
        return self.worst_value <= 1e-10 * self.scale


def negativity_check(side, alpha, n_random, grid, seed=0, kmax=None,
                     raise_on_violation=True):
    """Sign property over random band-limited traces, reproducible by seed.

    Checks Re<rho3, psi0> + Re<rho2, psi1> <= 0 for the west; for the east the
    pairing carries the transport correction (see sign_functional).  Each
    sample also cross-checks the energy identity against the independent
    dissipation sum.
    """
    rng = np.random.default_rng(seed)
    kmax = kmax or grid.N // 4
    worst, worst_gap, scale = -np.inf, 0.0, 0.0
    worst_sample = None
    y = grid.ygrid
    for s in range(n_random):
        def rand_band():
            ks = rng.integers(1, kmax + 1, size=4)
            amps = rng.normal(size=4)
            phases = rng.uniform(0, 2 * np.pi, size=4)
            return sum(a * np.cos(2 * np.pi * k * y / grid.L + p)
                       for a, k, p in zip(amps, ks, phases))
        tr = BoundaryTrace(rand_band(), rand_band())
        S, gap = sign_functional(side, alpha, tr, grid)
        mag = tr.sup_norm() ** 2 * grid.L
        scale = max(scale, mag)
        worst_gap = max(worst_gap, gap / max(mag, 1e-300))
        if S > worst:
            worst, worst_sample = S, s
    rep = SignReport(side=side, alpha=alpha, n_samples=n_random,
                     worst_value=worst, worst_identity_gap=worst_gap,
                     scale=scale)
    if raise_on_violation and not rep.passed:
        raise SignViolation(
            f"sign property violated: worst {worst:.3e} (scale {scale:.3e})",
            sample=worst_sample)
    return rep


def derivative_growth(side, alpha, N, xi_window=(1.0, 200.0), entry=(1, 0),
                      n_samples=24):
    """Observed growth exponent of the N-th xi-derivative of one entry.

    Finite differences in xi; the slope of log|d^N m| against log(1+xi) is
    returned together with its r^2.  N up to 3 (higher differences drown in
    round-off at double precision).
    """
    if not 0 <= N <= 3:
        raise ValueError("N must be within 0..3")
    from ._fd import fd_weights

    i, j = entry
    which = 2 * (i - 2) + j
    xis = np.geomspace(xi_window[0], xi_window[1], n_samples)
    vals = []
    for xi in xis:
        if N == 0:
            sel = _entries(side, alpha, np.array([xi]))[which]
            vals.append(abs(sel[0]))
        else:
            h = max(2e-3, 2e-3 * xi)
            pts = xi + h * np.arange(-(N + 2), N + 3)
            sel = _entries(side, alpha, pts)[which]
            vals.append(abs(fd_weights(pts, xi, N) @ sel))
    slope, r2 = loglog_fit(1.0 + xis, np.asarray(vals))
    return slope, r2


def high_pass_kernel_tail(side, alpha, grid, n_target=5.0):
    """Fitted |Y|-decay exponent of F^-1[(1 - chi) m_ij] for the m30 entry.

    The high-pass symbol grows like |xi|^3 but is smooth, so the kernel decays
    at least like |Y|^-5 away from the origin.  A smooth rolloff well inside
    the Nyquist band removes truncation ringing (the rolloff's own kernel
    contribution decays faster than any polynomial and cannot mask the tail).
    """
    consts = []
    for scale in (1, 2):
        g = type(grid)(L=grid.L * scale, N=grid.N * scale, x_max=grid.x_max,
                       nx=grid.nx, chi_cutoff=grid.chi_cutoff)
        xi = g.xi
        m20, m21, m30, m31 = _entries(side, alpha, xi)
        roll = 0.5 * (1.0 - np.tanh((xi - xi[-1] / 3.0) / (xi[-1] / 24.0)))
        khat = (1.0 - g.chi()) * m30 * roll
        K = g.irfft(khat) * (g.N / g.L)
        y = g.ygrid.copy()
        y[y > g.L / 2] -= g.L
        sel = (np.abs(y) > g.L / 8) & (np.abs(y) < g.L / 2.01)
        consts.append(float(np.max(np.abs(K[sel]) * np.abs(y[sel]) ** n_target)))
    stability = consts[1] / consts[0]
    return consts[0], stability


def nonlinear_rho3_extra(field, alpha, row=-1):
    """Quadratic boundary terms the nonlinear transparent condition adds to
    rho3 at the interface row:

        dY(|perp-grad Psi|^2)/2 + (perp-grad Psi . grad_w)[(1+a^2)dX - a dY]Psi

    The linear rows (apply/symbol) stay untouched; callers add this to rho3
    when coupling the nonlinear channel.
    """
    grid = field.grid

    def dy(v):
        return np.fft.irfft(np.fft.rfft(v, axis=-1) * 1j * grid.xi, n=grid.N,
                            axis=-1)

    d1 = grid.dx_matrix(1)
    a2 = 1.0 + alpha * alpha
    vals = field.values
    dX = d1 @ vals
    dY = dy(vals)
    g1 = alpha * dX - dY          # perp-grad components
    g2 = dX
    w = a2 * dX - alpha * dY
    adv = g1 * (d1 @ w) + g2 * (dy(w) - alpha * (d1 @ w))
    extra = 0.5 * dy(g1 * g1 + g2 * g2) + adv
    return extra[row]
