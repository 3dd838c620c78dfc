import numpy as np
import pytest
from numpy.testing import assert_allclose

from blt import halfspace as hs
from blt import steklov
from blt.fields import BoundaryTrace, FieldSlice, SpectralGrid


def grid64(**kw):
    args = dict(L=64.0, N=128, x_max=30.0, nx=140)
    args.update(kw)
    return SpectralGrid(**args)


def test_west_low_frequency_fixed_points():
    M = steklov.symbol("west", 0.0, 1e-4)
    assert_allclose(M, [[-1.0, -1.0], [-0.5, 0.0]], atol=1e-3)
    for alpha in (0.5, 1.0, 2.0):
        M = steklov.symbol("west", alpha, 1e-5)
        a2 = 1 + alpha**2
        assert abs(M[0, 0] + a2 ** (2 / 3)) < 1e-3
        assert abs(M[0, 1] + a2 ** (4 / 3)) < 1e-3
        assert abs(M[1, 0] + 0.5) < 1e-3


def test_east_low_frequency_fixed_points():
    for alpha in (0.0, 1.0, 2.0):
        M = steklov.symbol("east", alpha, 1e-5)
        a2 = 1 + alpha**2
        assert abs(M[0, 0]) < 1e-3              # (1+a^2)|xi|^2 -> 0
        assert abs(M[0, 1] - a2 ** (4 / 3)) < 1e-3
        assert abs(M[1, 0] - 0.5) < 1e-3
        assert abs(M[1, 1] + a2 ** (2 / 3)) < 1e-3


def test_east_row1_scales_like_xi_squared():
    a2 = 1.0 + 0.49
    for xi in (1e-3, 3e-3):
        M = steklov.symbol("east", 0.7, xi)
        assert abs(M[0, 0] - a2 * xi**2) < 1e-2 * a2 * xi**2 + 1e-12


def test_west_high_frequency_leading_terms():
    # xi -> +inf limits; the xi -> -inf branch is the conjugate of each entry
    for alpha in (0.0, 0.8):
        xi = 400.0
        M = steklov.symbol("west", alpha, xi)
        a2 = 1 + alpha**2
        assert abs(M[0, 0] / xi**2 - (-2 * (1 - 1j * alpha))) < 0.05
        assert abs(M[0, 1] / xi - (-2 * a2)) < 0.15
        assert abs(M[1, 0] / xi**3 - (-2.0)) < 0.05
        assert abs(M[1, 1] / xi**2 - (-2 * (1 + 1j * alpha))) < 0.1


def test_east_high_frequency_leading_terms():
    for alpha in (0.0, 0.8):
        xi = 400.0
        M = steklov.symbol("east", alpha, xi)
        a2 = 1 + alpha**2
        assert abs(M[0, 0] / xi**2 - 2 * (1 + 1j * alpha)) < 0.05
        assert abs(M[0, 1] / xi - 2 * a2) < 0.15
        n30_hf = -2 * (1 + 1j * alpha) ** 3 / a2 - 2j * alpha
        assert abs(M[1, 0] / xi**3 - n30_hf) < 0.05
        assert abs(M[1, 1] / xi**2 - (-2 * (1 + 3j * alpha))) < 0.1


def test_closed_forms_match_direct_representation():
    xis = np.geomspace(0.05, 80.0, 40)
    for side in ("west", "east"):
        for alpha in (0.0, 0.7, -1.3):
            closed = np.stack(steklov._entries(side, alpha, xis))
            direct = np.stack(steklov.direct_entries(side, alpha, xis))
            scale = np.abs(closed) + 1.0
            assert np.max(np.abs(closed - direct) / scale) < 1e-9


def test_conjugation_symmetry():
    tab = steklov.SteklovSymbol("west", 0.6, np.array([0.5, 2.0, 11.0]))
    for xi in (0.5, 2.0, 11.0):
        assert_allclose(tab.at(-xi), np.conj(tab.at(xi)), rtol=1e-12)


def test_apply_matches_differential_trace_oracle():
    # rho rows from the symbol equal dense differentiation of the actual
    # half-space solve at the interface
    grid = SpectralGrid(L=32.0, N=64, x_max=25.0, nx=400,
                        xgrid=np.linspace(0.0, 25.0, 400))
    alpha = 0.4
    y = grid.ygrid
    tr = BoundaryTrace(np.cos(2 * np.pi * y / grid.L),
                       0.3 * np.sin(4 * np.pi * y / grid.L))
    fs = hs.solve_homogeneous("west", alpha, tr, grid)
    rho2, rho3 = steklov.apply("west", alpha, tr, grid)

    from blt._fd import diff_matrix
    d1 = diff_matrix(grid.xgrid, 1, stencil=9)
    d2 = diff_matrix(grid.xgrid, 2, stencil=9)

    def dy(v):
        return np.fft.irfft(np.fft.rfft(v, axis=-1) * 1j * grid.xi, n=grid.N,
                            axis=-1)

    a2 = 1 + alpha**2
    vals = fs.values
    lap = (a2 * (d2 @ vals) - 2 * alpha * (d1 @ dy(vals)) + dy(dy(vals)))
    r2_direct = a2 * lap[0]
    dxlap = d1 @ lap
    r3_direct = -(a2 * dxlap[0] - 2 * alpha * dy(lap)[0]) + 0.5 * vals[0]
    scale = max(np.max(np.abs(rho2)), np.max(np.abs(rho3)))
    assert np.max(np.abs(rho2 - r2_direct)) < 1e-6 * scale
    assert np.max(np.abs(rho3 - r3_direct)) < 1e-6 * scale


def test_apply_constant_trace_west():
    grid = grid64()
    c = 0.8
    tr = BoundaryTrace(np.full(grid.N, c), np.zeros(grid.N))
    rho2, rho3 = steklov.apply("west", 0.0, tr, grid)
    assert_allclose(rho3, -0.5 * c, atol=1e-12)


def test_apply_zero_trace():
    grid = grid64()
    rho2, rho3 = steklov.apply("east", 0.9, BoundaryTrace.zero(grid), grid)
    assert np.max(np.abs(rho2)) == 0.0
    assert np.max(np.abs(rho3)) == 0.0


def test_apply_real_output():
    grid = grid64()
    rng = np.random.default_rng(4)
    tr = BoundaryTrace(rng.normal(size=grid.N), rng.normal(size=grid.N))
    rho2, rho3 = steklov.apply("west", 1.1, tr, grid)
    assert np.isrealobj(rho2) and np.isrealobj(rho3)


def test_single_mode_pairing_sign():
    grid = grid64()
    k1 = 3
    xi1 = 2 * np.pi * k1 / grid.L
    tr = BoundaryTrace(np.cos(xi1 * grid.ygrid), np.zeros(grid.N))
    S, gap = steklov.sign_functional("west", 0.0, tr, grid)
    # pairing of a single mode equals (L/2) Re m30(xi1)
    m = steklov.symbol("west", 0.0, xi1)
    assert_allclose(S, 0.5 * grid.L * m[1, 0].real, rtol=1e-10)
    assert S <= 0
    assert gap < 1e-10 * abs(S)


def test_sign_property_west_sweep():
    grid = grid64()
    for alpha in (0.0, 1.0, -1.0):
        rep = steklov.negativity_check("west", alpha, 200, grid, seed=11)
        assert rep.passed
        assert rep.worst_identity_gap < 1e-9


def test_sign_property_east_sweep():
    grid = grid64()
    for alpha in (0.0, 1.0, -1.0):
        rep = steklov.negativity_check("east", alpha, 200, grid, seed=12)
        assert rep.passed
        assert rep.worst_identity_gap < 1e-9


def test_zero_trace_pairing_is_zero():
    grid = grid64()
    S, gap = steklov.sign_functional("west", 0.3, BoundaryTrace.zero(grid), grid)
    assert S == 0.0 and gap == 0.0


def test_derivative_growth_orders():
    slope, r2 = steklov.derivative_growth("west", 0.5, 0, entry=(3, 0))
    assert r2 > 0.9 and abs(slope - 3.0) <= 0.35
    slope, r2 = steklov.derivative_growth("west", 0.5, 1, entry=(3, 0))
    assert r2 > 0.9 and abs(slope - 2.0) <= 0.35
    slope, r2 = steklov.derivative_growth("west", 0.5, 0, entry=(2, 1))
    assert r2 > 0.9 and abs(slope - 1.0) <= 0.35


def test_derivative_growth_bound_all_orders():
    # |d^N m(xi)| <= C (1+|xi|)^(3-N) over the sampled window for N = 0..3
    for N in range(4):
        for entry in ((2, 0), (2, 1), (3, 0), (3, 1)):
            slope, _ = steklov.derivative_growth("west", 0.5, N, entry=entry)
            assert slope <= 3.0 - N + 0.35


def test_high_pass_kernel_tail():
    # |K(Y)| |Y|^5 stays bounded in the outer window, stable when the period
    # doubles: the |Y|^-5 envelope of the high-pass kernel
    grid = SpectralGrid(L=256.0, N=4096, x_max=20.0, nx=40)
    C5, stability = steklov.high_pass_kernel_tail("west", 0.0, grid)
    assert np.isfinite(C5)
    assert 0.5 < stability < 1.5


def test_boundedness_proxy_stable_under_refinement():
    rng = np.random.default_rng(3)
    ratios = {}
    for N in (128, 256):
        grid = grid64(N=N)
        worst = 0.0
        for _ in range(60):
            p0h = np.zeros(N // 2 + 1, dtype=complex)
            p1h = np.zeros(N // 2 + 1, dtype=complex)
            ks = rng.integers(1, 20, size=5)
            p0h[ks] = rng.normal(size=5) + 1j * rng.normal(size=5)
            p1h[ks] = rng.normal(size=5) + 1j * rng.normal(size=5)
            tr = BoundaryTrace(np.fft.irfft(p0h, n=N), np.fft.irfft(p1h, n=N))
            rho2, rho3 = steklov.apply("west", 0.4, tr, grid)
            xi = grid.xi
            wplus = (1 + xi**2)
            out = (np.sum(np.abs(grid.rfft(rho2)) ** 2 / wplus ** 0.5)
                   + np.sum(np.abs(grid.rfft(rho3)) ** 2 / wplus ** 1.5))
            data = (np.sum(np.abs(grid.rfft(tr.psi0)) ** 2 * wplus ** 1.5)
                    + np.sum(np.abs(grid.rfft(tr.psi1)) ** 2 * wplus ** 0.5))
            worst = max(worst, np.sqrt(out / data))
        ratios[N] = worst
    assert ratios[256] < 1.5 * ratios[128] + 1.0


def test_nonlinear_rho3_extra_zero_for_x_only_field():
    grid = grid64(nx=80)
    psi = FieldSlice(np.outer(np.exp(-grid.xgrid), np.ones(grid.N)), grid)
    extra = steklov.nonlinear_rho3_extra(psi, 0.5, row=0)
    assert np.max(np.abs(extra)) < 1e-10
