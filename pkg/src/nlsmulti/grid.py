"""Periodic grid, spectral calculus, quadrature and smooth profiles.

Scalar fields are arrays of shape ``(N,)``; two-component vector fields are
arrays of shape ``(2, N)``.  All transforms act along the last axis.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError, GridError


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform periodic lattice on [-L, L) with N nodes."""
    L: float
    N: int

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @cached_property
    def x(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.N)

    @cached_property
    def xi(self) -> np.ndarray:
        # Wavenumbers in numpy FFT order; the Nyquist mode carries -pi/h.
        return 2.0 * np.pi * np.fft.fftfreq(self.N, d=self.h)

    def same_as(self, other: "Grid") -> bool:
        return self.N == other.N and abs(self.L - other.L) <= 1e-14 * self.L

    def integrate(self, f):
        """Rectangle rule over the last axis."""
        return self.h * np.sum(f, axis=-1)

    def __repr__(self):
        return f"Grid(L={self.L:g}, N={self.N})"


def make_grid(half_length: float, n_points: int) -> Grid:
    if not np.isfinite(half_length) or half_length <= 0:
        raise ConfigError(f"half_length must be positive, got {half_length}")
    if int(n_points) != n_points or n_points < 8 or n_points % 2:
        raise ConfigError(f"n_points must be an even integer >= 8, got {n_points}")
    return Grid(float(half_length), int(n_points))


def check_same_grid(a: Grid, b: Grid):
    if not a.same_as(b):
        raise GridError(f"grid mismatch: {a!r} vs {b!r}")


def spectral_derivative(f, grid: Grid, order: int = 1):
    """Apply the Fourier multiplier (i xi)^order along the last axis."""
    if order not in (1, 2, 3, 4):
        raise ConfigError(f"unsupported derivative order {order}")
    xi = grid.xi
    mult = (1j * xi) ** order
    if order % 2 == 1:
        # odd derivatives of the Nyquist mode are not representable
        mult = mult.copy()
        mult[grid.N // 2] = 0.0
    out = np.fft.ifft(mult * np.fft.fft(f, axis=-1), axis=-1)
    if np.isrealobj(f):
        return out.real
    return out


def laplacian(f, grid: Grid):
    return spectral_derivative(f, grid, 2)


def translate(f, shift: float, grid: Grid):
    """Return f(x - shift) by a Fourier phase ramp (periodic)."""
    if shift == 0.0:
        return np.array(f, copy=True)
    out = np.fft.ifft(np.exp(-1j * grid.xi * shift) * np.fft.fft(f, axis=-1), axis=-1)
    if np.isrealobj(f):
        return out.real
    return out


def fourier_eval(f, grid: Grid, points):
    """Evaluate the trigonometric interpolant of f at arbitrary points.

    Points outside [-L, L) are wrapped periodically.  Cost is O(N M).
    """
    pts = np.asarray(points, dtype=float)
    c = np.fft.fft(f, axis=-1) / grid.N
    xi = grid.xi
    # symmetric treatment of the Nyquist mode keeps real data real
    k = grid.N // 2
    s = (pts + grid.L).ravel()
    res = np.empty(np.shape(f)[:-1] + s.shape, dtype=complex)
    block = 4096
    for start in range(0, s.size, block):
        sb = s[start:start + block]
        E = np.exp(1j * np.outer(xi, sb))
        E[k] = np.cos(xi[k] * sb)
        res[..., start:start + block] = c @ E
    out = res.reshape(np.shape(f)[:-1] + pts.shape)
    if np.isrealobj(f):
        return out.real
    return out


def resample(f, src: Grid, dst: Grid):
    """Transfer a localized field between grids.

    Same box: exact spectral zero padding or truncation.  Otherwise the
    trigonometric interpolant is evaluated at the destination nodes and set to
    zero outside the source box.
    """
    if src.same_as(dst):
        return np.array(f, copy=True)
    if abs(src.L - dst.L) <= 1e-14 * src.L:
        F = np.fft.fftshift(np.fft.fft(f, axis=-1), axes=-1)
        n_s, n_d = src.N, dst.N
        G = np.zeros(np.shape(f)[:-1] + (n_d,), dtype=complex)
        if n_d >= n_s:
            off = (n_d - n_s) // 2
            G[..., off:off + n_s] = F
            # split the source Nyquist coefficient symmetrically
            G[..., off] *= 0.5
            G[..., off + n_s] = G[..., off]
        else:
            off = (n_s - n_d) // 2
            G = F[..., off:off + n_d].copy()
        out = np.fft.ifft(np.fft.ifftshift(G, axes=-1), axis=-1) * (n_d / n_s)
        return out.real if np.isrealobj(f) else out
    inside = np.abs(dst.x) < src.L
    out = np.zeros(np.shape(f)[:-1] + (dst.N,), dtype=complex)
    out[..., inside] = fourier_eval(f, src, dst.x[inside])
    return out.real if np.isrealobj(f) else out


def inner_product(f, g, grid: Grid) -> complex:
    """<f, g> = sum over components of the integral of f * conj(g)."""
    f = np.asarray(f)
    g = np.asarray(g)
    if f.shape != g.shape or f.shape[-1] != grid.N:
        raise GridError(f"shape mismatch {f.shape} vs {g.shape} on {grid!r}")
    return complex(grid.h * np.vdot(g.ravel(), f.ravel()))


def sigma_z(f):
    """Multiply a (2, N) field by diag(1, -1)."""
    out = np.array(f, dtype=complex, copy=True)
    out[1] *= -1.0
    return out


def sigma_pairing(f, g, grid: Grid) -> complex:
    """Symplectic pairing <f, sigma_z g>."""
    return inner_product(f, sigma_z(g), grid)


def l2_norm(f, grid: Grid) -> float:
    return float(np.sqrt(grid.h * np.sum(np.abs(f) ** 2)))


def japanese(x):
    """<x> = sqrt(1 + x^2)."""
    return np.sqrt(1.0 + np.asarray(x) ** 2)


def weighted_norm(f, grid: Grid, center: float = 0.0, exponent: float = 0.0,
                  window=None) -> float:
    """L2 norm of <x - center>^(-exponent) f, optionally restricted to a window."""
    if not np.isfinite(exponent):
        raise ConfigError("exponent must be finite")
    w = japanese(grid.x - center) ** (-exponent)
    if window is not None:
        a, b = window
        w = w * ((grid.x >= a) & (grid.x <= b))
    return l2_norm(w * np.asarray(f), grid)


def smooth_step(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1, and S(s) + S(1 - s) = 1."""
    s = np.asarray(s, dtype=float)

    def _f(z):
        out = np.zeros_like(z)
        pos = z > 0
        out[pos] = np.exp(-1.0 / z[pos])
        return out

    a = _f(s)
    b = _f(1.0 - s)
    return a / (a + b)


def _trajectory_midpoints(config, t: float):
    centers = np.array([p.y + p.v * t for p in config.solitons])
    if np.any(np.diff(centers) >= 0):
        raise ConfigError(f"soliton centers not strictly decreasing at t={t}: {centers}")
    return centers, 0.5 * (centers[:-1] + centers[1:]), centers[:-1] - centers[1:]


def cutoff_chi(grid: Grid, config, ell: int, t: float = 0.0,
               width_fraction: float = 0.1):
    """Smooth indicator of the region owned by soliton ``ell`` at time t.

    Solitons are indexed right to left (largest center first).  Transitions sit
    on the midpoints between consecutive linear trajectories and have width
    ``width_fraction`` times the local gap, so the family sums to one.
    """
    m = len(config.solitons)
    if not 0 <= ell < m:
        raise ConfigError(f"soliton index {ell} out of range for m={m}")
    if m == 1:
        return np.ones(grid.N)
    if not 0 < width_fraction < 1:
        raise ConfigError("width_fraction must lie in (0, 1)")
    _, mids, gaps = _trajectory_midpoints(config, t)

    def up(j):
        # rises from 0 to 1 across midpoint j (between solitons j and j+1)
        w = width_fraction * gaps[j]
        return smooth_step((grid.x - mids[j] + 0.5 * w) / w)

    right = np.zeros(grid.N) if ell == 0 else up(ell - 1)
    left = np.ones(grid.N) if ell == m - 1 else up(ell)
    return left - right


def sponge_profile(grid: Grid, width: float, strength: float):
    """Absorption rate profile, zero except within ``width`` of the box edges.

    The profile integrates to ``strength * width`` (the two edge ramps each
    contribute half).
    """
    if width <= 0 or width >= grid.L / 2:
        raise ConfigError(f"sponge width must lie in (0, L/2), got {width}")
    if strength < 0:
        raise ConfigError("sponge strength must be nonnegative")
    if strength == 0:
        return np.zeros(grid.N)
    d = np.abs(grid.x) - (grid.L - width)
    return strength * smooth_step(d / width)
