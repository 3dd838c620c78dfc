"""Grids, boundary traces and field slices shared by the layer solvers.

The tangential line is periodised with period L and N samples; frequencies
are the rfft set 2*pi*k/L.  Fields live on an (X-grid) x (Y-grid) lattice,
X clustered toward the interface to resolve the layer.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from ._fd import clustered_grid, diff_matrix, trapezoid_weights

MAGIC = b"BLT1"


@dataclass
class SpectralGrid:
    """Periodised tangential grid plus X sampling and the low-pass cutoff.

    xgrid must start at 0 (the interface); X_max should cover several decay
    lengths of the slowest active mode.  chi_cutoff separates the low-frequency
    band (|xi| < chi_cutoff) routed to slow-mode handling.
    """

    L: float = 64.0
    N: int = 128
    x_max: float = 30.0
    nx: int = 160
    chi_cutoff: float = 0.5
    cluster_ratio: float = 1.05
    xgrid: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.N & (self.N - 1):
            raise ValueError("N must be a power of two")
        if self.xgrid is None:
            self.xgrid = clustered_grid(self.x_max, self.nx, self.cluster_ratio)
        else:
            self.xgrid = np.asarray(self.xgrid, dtype=float)
            self.nx = len(self.xgrid)
            self.x_max = float(self.xgrid[-1])

    @property
    def ygrid(self):
        return np.arange(self.N) * (self.L / self.N)

    @property
    def xi(self):
        """Nonnegative rfft frequencies 2*pi*k/L, k = 0..N/2."""
        return 2.0 * np.pi * np.arange(self.N // 2 + 1) / self.L

    @property
    def xi_full(self):
        """Signed fft frequencies, numpy fft order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.N, d=1.0 / self.N) / self.L

    def rfft(self, values):
        return np.fft.rfft(values, axis=-1)

    def irfft(self, coeffs):
        return np.fft.irfft(coeffs, n=self.N, axis=-1)

    def dx_matrix(self, order=1):
        return diff_matrix(self.xgrid, order)

    def x_weights(self):
        return trapezoid_weights(self.xgrid)

    def chi(self, xi=None):
        """Smooth low-pass cutoff: 1 for |xi| <= cutoff/2, 0 for |xi| >= cutoff."""
        if xi is None:
            xi = self.xi
        xi = np.abs(np.asarray(xi, dtype=float))
        lo, hi = 0.5 * self.chi_cutoff, self.chi_cutoff
        out = np.zeros_like(xi)
        out[xi <= lo] = 1.0
        band = (xi > lo) & (xi < hi)
        t = (xi[band] - lo) / (hi - lo)
        # C^inf ramp exp(-1/t)/(exp(-1/t)+exp(-1/(1-t))) reversed
        f = lambda s: np.where(s > 0, np.exp(-1.0 / np.maximum(s, 1e-300)), 0.0)
        out[band] = f(1 - t) / (f(1 - t) + f(t))
        return out

    def with_resolution(self, nx=None, N=None):
        return SpectralGrid(L=self.L, N=N or self.N, x_max=self.x_max,
                            nx=nx or self.nx, chi_cutoff=self.chi_cutoff,
                            cluster_ratio=self.cluster_ratio)


@dataclass
class BoundaryTrace:
    """Interface data: value psi0 and normal derivative psi1 on the Y grid."""

    psi0: np.ndarray
    psi1: np.ndarray

    def __post_init__(self):
        self.psi0 = np.asarray(self.psi0, dtype=float)
        self.psi1 = np.asarray(self.psi1, dtype=float)
        if self.psi0.shape != self.psi1.shape:
            raise ValueError("psi0 and psi1 must have the same shape")
        if not (np.all(np.isfinite(self.psi0)) and np.all(np.isfinite(self.psi1))):
            raise ValueError("trace entries must be finite")

    @classmethod
    def zero(cls, grid):
        return cls(np.zeros(grid.N), np.zeros(grid.N))

    def scaled(self, s):
        return BoundaryTrace(s * self.psi0, s * self.psi1)

    def sup_norm(self):
        return max(np.max(np.abs(self.psi0)), np.max(np.abs(self.psi1)))


@dataclass
class FieldSlice:
    """Field values on xgrid x ygrid with side/slope metadata.

    values[i, j] = Psi(xgrid[i], ygrid[j]); real for physical fields, complex
    while working per-frequency.
    """

    values: np.ndarray
    grid: SpectralGrid
    side: str = "west"
    alpha: float = 0.0
    eps: float | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != (self.grid.nx, self.grid.N):
            raise ValueError(
                f"values shape {self.values.shape} does not match grid "
                f"({self.grid.nx}, {self.grid.N})"
            )

    @classmethod
    def zero(cls, grid, side="west", alpha=0.0):
        return cls(np.zeros((grid.nx, grid.N)), grid, side, alpha)

    def copy(self):
        return FieldSlice(self.values.copy(), self.grid, self.side, self.alpha, self.eps)

    def is_complex(self):
        return np.iscomplexobj(self.values)

    def trace(self):
        """Boundary value row and the spectral X-derivative row at X = 0."""
        d1 = self.grid.dx_matrix(1)
        return self.values[0], (d1 @ self.values)[0]

    def windowed_sup(self, weight=None):
        """sup over unit Y-windows of the window L2 norm, optionally X-weighted."""
        vals = np.abs(self.values)
        if weight is not None:
            vals = vals * weight[:, None]
        win = max(1, int(round(self.grid.N / self.grid.L)))
        nwin = self.grid.N // win
        blocks = vals[:, : nwin * win].reshape(vals.shape[0], nwin, win)
        return float(np.max(np.sqrt(np.mean(blocks**2, axis=(0, 2)))))

    def decay_rate(self, floor=1e-13):
        """Fitted exponential decay rate of the X-profile of sup_Y |Psi|.

        Oscillatory profiles are handled by fitting through the peaks of the
        right-to-left running maximum rather than the raw profile.
        """
        prof = np.max(np.abs(self.values), axis=1)
        if prof.max() <= 0:
            return np.inf
        keep = prof > floor * prof.max()
        x, p = self.grid.xgrid[keep], prof[keep]
        if len(x) < 4:
            return np.inf
        env = np.maximum.accumulate(p[::-1])[::-1]
        peaks = np.concatenate([env[:-1] > env[1:], [True]])
        if peaks.sum() >= 3:
            x, p = x[peaks], env[peaks]
        slope, _ = np.polyfit(x, np.log(p), 1)
        return -float(slope)


def norm_h2_proxy(fs):
    """Discrete H2-type norm: L2 of the field and of its first/second derivatives."""
    g = fs.grid
    d1, d2 = g.dx_matrix(1), g.dx_matrix(2)
    ky = 1j * g.xi_full
    vhat = np.fft.fft(fs.values, axis=1)
    dy = np.real(np.fft.ifft(vhat * ky, axis=1)) if not fs.is_complex() else np.fft.ifft(vhat * ky, axis=1)
    dyy = np.real(np.fft.ifft(vhat * ky**2, axis=1)) if not fs.is_complex() else np.fft.ifft(vhat * ky**2, axis=1)
    wx = g.x_weights()[:, None]
    dy_scale = g.L / g.N
    parts = [fs.values, d1 @ fs.values, dy, d2 @ fs.values, dyy]
    return float(np.sqrt(sum(np.sum(wx * np.abs(p) ** 2) * dy_scale for p in parts)))


def dump_field(fs, path):
    """Write a FieldSlice in the binary layout: magic, u32 nx, u32 ny,
    u8 complex flag, then little-endian f64 row-major (Y fastest)."""
    cflag = 1 if fs.is_complex() else 0
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIB", fs.values.shape[0], fs.values.shape[1], cflag))
        if cflag:
            inter = np.empty(fs.values.shape + (2,), dtype="<f8")
            inter[..., 0], inter[..., 1] = fs.values.real, fs.values.imag
            fh.write(inter.tobytes(order="C"))
        else:
            fh.write(fs.values.astype("<f8").tobytes(order="C"))


def load_field(path, grid=None, side="west", alpha=0.0):
    """Read the binary layout written by dump_field."""
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ValueError("bad magic; not a field dump")
        nx, ny, cflag = struct.unpack("<IIB", fh.read(9))
        raw = fh.read()
    if cflag:
        arr = np.frombuffer(raw, dtype="<f8").reshape(nx, ny, 2)
        values = arr[..., 0] + 1j * arr[..., 1]
    else:
        values = np.frombuffer(raw, dtype="<f8").reshape(nx, ny).copy()
    if grid is None:
        grid = SpectralGrid(N=ny, nx=nx)
    return FieldSlice(values, grid, side, alpha)
