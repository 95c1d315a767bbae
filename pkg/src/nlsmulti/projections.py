"""Discrete frames and symplectic projections for several moving solitons.

Each soliton contributes six lifted vectors (Z_plus, Z_minus and the four root
vectors).  Coefficients are defined through the pairing <f, sigma_z g>: the
remainder u_c is sigma_z-orthogonal to every frame vector.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, FrameDegeneracyError
from .grid import Grid, l2_norm, sigma_z
from .linop import SpectralData, assemble_H, discrete_spectrum
from .solitons import MultiSolitonConfig, galilean_lift

GRAM_COND_BOUND = 1e6
LABELS = ("z_plus", "z_minus", "translation", "phase", "galilean", "scaling")


class SpectralLibrary:
    """Spectral data per scale alpha, rescaled from one reference solve."""

    def __init__(self, reference: SpectralData, polish: bool = True):
        self.reference = reference
        self.polish = polish
        self._cache = {(reference.alpha, reference.grid.L, reference.grid.N): reference}

    @classmethod
    def compute(cls, alpha: float, k: float, grid: Grid, **kw) -> "SpectralLibrary":
        return cls(discrete_spectrum(assemble_H(alpha, k, grid)), **kw)

    def get(self, alpha: float, grid: Grid = None) -> SpectralData:
        grid = grid or self.reference.grid
        key = (float(alpha), grid.L, grid.N)
        if key not in self._cache:
            self._cache[key] = self.reference.rescale(alpha, grid, polish=self.polish)
        return self._cache[key]


def as_library(spectral) -> SpectralLibrary:
    if isinstance(spectral, SpectralLibrary):
        return spectral
    if isinstance(spectral, SpectralData):
        return SpectralLibrary(spectral)
    if isinstance(spectral, dict):
        vals = list(spectral.values())
        lib = SpectralLibrary(vals[0])
        for sd in vals:
            lib._cache[(sd.alpha, sd.grid.L, sd.grid.N)] = sd
        return lib
    raise ConfigError(f"cannot interpret {type(spectral).__name__} as spectral data")


@dataclass(eq=False)
class DiscreteFrame:
    config: MultiSolitonConfig
    t: float
    grid: Grid
    vectors: np.ndarray = field(repr=False)   # (6m, 2, N)
    dual: np.ndarray = field(repr=False)      # (6m, 2, N)
    gram: np.ndarray = field(repr=False)      # G_ij = <e_i, sigma_z e_j>
    cond: float = np.nan

    @property
    def m(self) -> int:
        return self.config.m

    def labels(self):
        return [(ell, name) for ell in range(self.m) for name in LABELS]

    def pairings(self, u) -> np.ndarray:
        """p_i = <u, sigma_z e_i> for u of shape (..., 2, N)."""
        u = np.asarray(u)
        sz = self.vectors.copy()
        sz[:, 1] *= -1
        flat = u.reshape(u.shape[:-2] + (-1,))
        return self.grid.h * flat @ np.conj(sz.reshape(len(sz), -1)).T

    def biorthogonality_defect(self) -> float:
        sz = self.dual.copy()
        sz[:, 1] *= -1
        B = self.grid.h * self.vectors.reshape(len(sz), -1) @ np.conj(sz.reshape(len(sz), -1)).T
        return float(np.max(np.abs(B - np.eye(len(B)))))


def _closest_pair(config: MultiSolitonConfig, t: float):
    if config.m < 2:
        return None
    c = np.array([p.y + p.v * t for p in config.solitons])
    j = int(np.argmin(c[:-1] - c[1:]))
    return (j, j + 1)


def build_frame(config: MultiSolitonConfig, spectral, t: float, grid: Grid,
                cond_bound: float = GRAM_COND_BOUND) -> DiscreteFrame:
    """Lift the static frames along the linear trajectories and solve the Gram system."""
    lib = as_library(spectral)
    vecs = []
    for p in config.solitons:
        static = lib.get(p.alpha, grid).static_frame()
        vecs.extend(galilean_lift(e, p, t, grid) for e in static)
    E = np.array(vecs)
    n = len(E)
    Ez = E.copy()
    Ez[:, 1] *= -1
    G = grid.h * E.reshape(n, -1) @ np.conj(Ez.reshape(n, -1)).T
    cond = float(np.linalg.cond(G))
    if not np.isfinite(cond) or cond > cond_bound:
        pair = _closest_pair(config, t)
        raise FrameDegeneracyError(f"Gram condition number {cond:.3g} exceeds {cond_bound:.3g}"
                                   + (f"; closest solitons {pair}" if pair else ""), cond, pair)
    C = np.conj(np.linalg.inv(G))
    dual = np.einsum("kj,kab->jab", C, E)
    return DiscreteFrame(config, t, grid, E, dual, G, cond)


@dataclass(eq=False)
class Decomposition:
    coeffs: np.ndarray            # (m, 6), ordered as LABELS
    u_c: np.ndarray = field(repr=False)

    @property
    def b_plus(self):
        return self.coeffs[:, 0]

    @property
    def b_minus(self):
        return self.coeffs[:, 1]

    @property
    def root(self):
        return self.coeffs[:, 2:]


def coefficients(u, frame: DiscreteFrame) -> np.ndarray:
    p = frame.pairings(u)
    return np.linalg.solve(frame.gram.T, p.T).T


def decompose(u, frame: DiscreteFrame) -> Decomposition:
    u = np.asarray(u, dtype=complex)
    c = coefficients(u, frame)
    discrete = np.tensordot(c, frame.vectors, axes=(-1, 0))
    return Decomposition(c.reshape(u.shape[:-2] + (frame.m, 6)), u - discrete)


def reconstruct(dec: Decomposition, frame: DiscreteFrame):
    c = dec.coeffs.reshape(dec.coeffs.shape[:-2] + (-1,))
    return dec.u_c + np.tensordot(c, frame.vectors, axes=(-1, 0))


_WHICH = {"unst": [0], "stab": [1], "root": [2, 3, 4, 5], "h": [0, 1], "disc": [0, 1, 2, 3, 4, 5]}


def project(u, frame: DiscreteFrame, which: str):
    """Component of u: "unst", "stab", "root", "h" (unst + stab), "disc" or "c"."""
    u = np.asarray(u, dtype=complex)
    c = coefficients(u, frame)
    if which == "c":
        return u - np.tensordot(c, frame.vectors, axes=(-1, 0))
    if which not in _WHICH:
        raise ConfigError(f"unknown projection {which!r}")
    mask = np.zeros(6 * frame.m, dtype=bool)
    for ell in range(frame.m):
        mask[[6 * ell + j for j in _WHICH[which]]] = True
    return np.tensordot(c * mask, frame.vectors, axes=(-1, 0))


def projection_algebra(frame: DiscreteFrame, fields) -> dict:
    """Completeness, idempotence and mutual annihilation defects on test fields.

    Defects are relative to the field norm, maximized over the fields.
    """
    kinds = ("unst", "stab", "root", "c")
    out = {"completeness": 0.0, "idempotence": 0.0, "annihilation": 0.0}
    for u in fields:
        nu = l2_norm(u, frame.grid)
        parts = {w: project(u, frame, w) for w in kinds}
        total = sum(parts.values())
        out["completeness"] = max(out["completeness"], l2_norm(total - u, frame.grid) / nu)
        for a in kinds:
            pa = parts[a]
            out["idempotence"] = max(out["idempotence"],
                                     l2_norm(project(pa, frame, a) - pa, frame.grid) / nu)
            for b in kinds:
                if b != a:
                    out["annihilation"] = max(out["annihilation"],
                                              l2_norm(project(pa, frame, b), frame.grid) / nu)
    return out


def random_test_fields(grid: Grid, n: int, seed: int = 0, centers=(0.0,), width: float = 3.0,
                       physical: bool = False):
    """Localized random smooth fields (random Fourier modes under Gaussian envelopes)."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        f = np.zeros((2, grid.N), dtype=complex)
        for c in centers:
            env = np.exp(-((grid.x - c) / width) ** 2)
            for comp in range(2):
                modes = rng.normal(size=6) + 1j * rng.normal(size=6)
                ks = rng.uniform(-2, 2, size=6)
                f[comp] += env * (modes[:, None] * np.exp(1j * ks[:, None] * grid.x)).sum(0)
        if physical:
            f[1] = np.conj(f[0])
        out.append(f)
    return out
