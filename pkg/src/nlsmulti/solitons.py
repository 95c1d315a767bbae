"""Ground states, solitary waves, multi-soliton superpositions and Galilean lifts.

Conventions: i psi_t + psi_xx + |psi|^{2k} psi = 0 with ground state

    phi_alpha(x) = alpha^{1/k} (k+1)^{1/(2k)} sech^{1/k}(k alpha x)

solving -phi'' + alpha^2 phi = phi^{2k+1}, and solitary waves

    exp(i(v x/2 - v^2 t/4 + alpha^2 t + gamma)) phi_alpha(x - v t - y).
"""
import warnings
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, TruncationWarning
from .grid import Grid, translate

DEFAULT_K = 3.0
TRUNCATION_LEVEL = 1e-15


@dataclass(frozen=True)
class SolitonParams:
    v: float = 0.0
    y: float = 0.0
    alpha: float = 1.0
    gamma: float = 0.0

    def __post_init__(self):
        vals = (self.v, self.y, self.alpha, self.gamma)
        if not all(np.isfinite(vals)):
            raise ConfigError(f"non-finite soliton parameters {vals}")
        if self.alpha <= 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")

    def as_array(self) -> np.ndarray:
        return np.array([self.v, self.y, self.alpha, self.gamma])

    @classmethod
    def from_array(cls, a) -> "SolitonParams":
        return cls(*map(float, a))

    def advanced(self, t: float) -> "SolitonParams":
        """Instantaneous parameters of the free solitary wave at time t."""
        return replace(self, y=self.y + self.v * t,
                       gamma=self.gamma + (self.alpha ** 2 - self.v ** 2 / 4) * t)


@dataclass(frozen=True)
class MultiSolitonConfig:
    """Ordered soliton list, rightmost first (y_1 > y_2 > ...)."""
    solitons: tuple
    k: float = DEFAULT_K

    def __post_init__(self):
        sol = tuple(p if isinstance(p, SolitonParams) else SolitonParams(**p)
                    for p in self.solitons)
        object.__setattr__(self, "solitons", sol)
        if len(sol) < 1:
            raise ConfigError("at least one soliton is required")
        if not np.isfinite(self.k) or self.k <= 0:
            raise ConfigError(f"k must be positive, got {self.k}")
        ys = np.array([p.y for p in sol])
        vs = np.array([p.v for p in sol])
        if np.any(np.diff(ys) >= 0):
            raise ConfigError(f"centers must be strictly decreasing, got {ys}")
        if np.any(np.diff(vs) > 0):
            raise ConfigError(f"velocities must be non-increasing, got {vs}")

    @property
    def m(self) -> int:
        return len(self.solitons)

    def as_array(self) -> np.ndarray:
        """Flat parameter vector (v, y, alpha, gamma) per soliton."""
        return np.concatenate([p.as_array() for p in self.solitons])

    def with_array(self, a) -> "MultiSolitonConfig":
        a = np.asarray(a, dtype=float).reshape(self.m, 4)
        return MultiSolitonConfig(tuple(SolitonParams.from_array(r) for r in a), self.k)

    def advanced(self, t: float) -> "MultiSolitonConfig":
        return MultiSolitonConfig(tuple(p.advanced(t) for p in self.solitons), self.k)


def single(alpha=1.0, k=DEFAULT_K, v=0.0, y=0.0, gamma=0.0) -> MultiSolitonConfig:
    return MultiSolitonConfig((SolitonParams(v, y, alpha, gamma),), k)


def _nodes(grid_or_x):
    return grid_or_x.x if isinstance(grid_or_x, Grid) else np.asarray(grid_or_x, dtype=float)


def _log_cosh(z):
    a = np.abs(z)
    return a + np.log1p(np.exp(-2.0 * a)) - np.log(2.0)


def _check_truncation(phi, where=""):
    edge = max(abs(phi[0]), abs(phi[-1]))
    if edge > TRUNCATION_LEVEL * max(np.max(np.abs(phi)), 1e-300):
        warnings.warn(f"profile{where} not decayed at box edge (|edge| = {edge:.2e})",
                      TruncationWarning, stacklevel=3)
        return True
    return False


def ground_state(alpha: float, k: float, grid, center: float = 0.0):
    """phi_alpha(x - center) evaluated at the grid nodes (or an array of points)."""
    if alpha <= 0 or k <= 0:
        raise ConfigError("alpha and k must be positive")
    x = _nodes(grid) - center
    amp = alpha ** (1.0 / k) * (k + 1.0) ** (1.0 / (2.0 * k))
    phi = amp * np.exp(-_log_cosh(k * alpha * x) / k)
    if isinstance(grid, Grid):
        _check_truncation(phi)
    return phi


class GroundStateFamily(NamedTuple):
    phi: np.ndarray
    dphi: np.ndarray      # d/dx
    dalpha: np.ndarray    # d/dalpha
    xphi: np.ndarray
    xdphi: np.ndarray


def ground_state_family(alpha: float, k: float, grid, center: float = 0.0) -> GroundStateFamily:
    x = _nodes(grid) - center
    phi = ground_state(alpha, k, grid, center)
    dphi = -alpha * np.tanh(k * alpha * x) * phi
    dalpha = (phi / k + x * dphi) / alpha
    return GroundStateFamily(phi, dphi, dalpha, x * phi, x * dphi)


def ground_state_second(alpha: float, k: float, grid, center: float = 0.0):
    """Closed-form x- and alpha-derivatives used by the modulation Jacobian.

    Returns (phi_xx, d_alpha phi_x, d_alpha^2 phi).
    """
    x = _nodes(grid) - center
    fam = ground_state_family(alpha, k, grid, center)
    phi, dphi, da = fam.phi, fam.dphi, fam.dalpha
    phi_xx = alpha ** 2 * phi - phi ** (2 * k + 1)
    da_x = (dphi / k + dphi + x * phi_xx) / alpha
    da_a = -da / alpha + (da / k + x * da_x) / alpha
    return phi_xx, da_x, da_a


def phase(p: SolitonParams, t: float, x):
    return p.v * x / 2 - p.v ** 2 * t / 4 + p.alpha ** 2 * t + p.gamma


def solitary_wave(p: SolitonParams, k: float, t: float, grid):
    x = _nodes(grid)
    phi = ground_state(p.alpha, k, x, p.y + p.v * t)
    if isinstance(grid, Grid):
        _check_truncation(phi, " of translated soliton")
    return np.exp(1j * phase(p, t, x)) * phi


def multi_soliton(config: MultiSolitonConfig, t: float, grid):
    x = _nodes(grid)
    out = np.zeros(x.shape, dtype=complex)
    for p in config.solitons:
        out += solitary_wave(p, config.k, t, grid)
    return out


def galilean_lift(f, p: SolitonParams, t: float, grid: Grid):
    """Move a static two-component field onto the trajectory of soliton p.

    g(f)(t, x) = exp(i sigma_z theta(t, x)) f(x - v t - y) with
    theta = v x/2 - v^2 t/4 + alpha^2 t + gamma.
    """
    f = np.asarray(f)
    g = translate(f.astype(complex), p.y + p.v * t, grid)
    e = np.exp(1j * phase(p, t, grid.x))
    return np.stack([e * g[0], np.conj(e) * g[1]])


def galilean_unlift(g, p: SolitonParams, t: float, grid: Grid):
    """Inverse of galilean_lift."""
    g = np.asarray(g, dtype=complex)
    e = np.exp(-1j * phase(p, t, grid.x))
    f = np.stack([e * g[0], np.conj(e) * g[1]])
    return translate(f, -(p.y + p.v * t), grid)


@dataclass
class HypothesisReport:
    h1_velocity: bool
    h1_center: bool
    h2: bool
    velocity_margin: float
    center_margin: float
    h2_margin: float
    min_gap: float
    max_gap: float
    delta0: float
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.h1_velocity and self.h1_center and self.h2


def check_hypotheses(config: MultiSolitonConfig, velocity_threshold: float = 0.0,
                     center_threshold: float = 0.0, delta_constant: float = 25.0) -> HypothesisReport:
    """Separation hypotheses and the matching smallness scale delta0.

    velocity_threshold and center_threshold play the role of the unquantified
    constants in the velocity and center separation hypotheses.  The scale is
    delta0 = N exp(-0.4 min(alpha) min(gap)) with N = ``delta_constant``,
    which must exceed max(|v|, 20).
    """
    vmax = max(abs(p.v) for p in config.solitons)
    if delta_constant <= max(vmax, 20.0):
        raise ConfigError(f"delta_constant must exceed max(|v|, 20) = {max(vmax, 20.0)}")
    alpha_min = min(p.alpha for p in config.solitons)
    if config.m == 1:
        inf = float("inf")
        return HypothesisReport(True, True, True, inf, inf, inf, inf, 0.0, 0.0)
    ys = np.array([p.y for p in config.solitons])
    vs = np.array([p.v for p in config.solitons])
    gaps = ys[:-1] - ys[1:]
    vgaps = vs[:-1] - vs[1:]
    vmargin = float(np.min(vgaps) - velocity_threshold)
    cmargin = float(np.min(gaps) - center_threshold)
    h2_bound = np.exp(alpha_min * np.min(gaps) / 600.0)
    h2_margin = float(h2_bound - np.max(gaps))
    delta0 = delta_constant * np.exp(-0.4 * alpha_min * np.min(gaps))
    return HypothesisReport(vmargin > 0, cmargin > 0, h2_margin >= 0, vmargin, cmargin,
                            h2_margin, float(np.min(gaps)), float(np.max(gaps)), float(delta0),
                            {"gaps": gaps.tolist(), "velocity_gaps": vgaps.tolist(),
                             "h2_bound": float(h2_bound)})
