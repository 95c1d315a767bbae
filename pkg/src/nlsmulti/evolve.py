"""Split-step integrators: nonlinear NLS, linear charge transfer, free flow.

All schemes are Strang splittings with exactly solvable substeps:
the dispersive part is a Fourier multiplier and the nonlinear / potential part
is a pointwise phase rotation or 2x2 matrix exponential.
"""
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft

from .errors import BlowUpError, ConfigError, StabilityWarning
from .grid import Grid, sponge_profile
from .solitons import MultiSolitonConfig, ground_state

SNAPSHOT_MAGIC = b"NLSSNAP1"
_HEADER = struct.Struct("<8sqdd")


@dataclass
class IntegratorConfig:
    dt: float = 1e-3
    t_end: float = 1.0
    sponge: bool = False
    sponge_width: float = None      # default L/5
    sponge_strength: float = 5.0
    stride: int = 100               # steps between recorded diagnostics
    snapshot_stride: int = 0        # steps between stored fields, 0 = never
    blowup_threshold: float = None  # default: see default_blowup_threshold
    workers: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.t_end < 0:
            raise ConfigError(f"t_end must be nonnegative, got {self.t_end}")
        if self.stride < 1:
            raise ConfigError("stride must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def sponge_field(self, grid: Grid):
        if not self.sponge:
            return None
        width = self.sponge_width if self.sponge_width is not None else grid.L / 5
        return sponge_profile(grid, width, self.sponge_strength)


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    diagnostics: dict
    snapshots: list = field(default_factory=list)   # (t, field) pairs

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("record times must be strictly increasing")
        self.diagnostics = {k: np.asarray(v) for k, v in self.diagnostics.items()}

    def __getitem__(self, key):
        return self.diagnostics[key]


def _readonly(a):
    v = a.view()
    v.flags.writeable = False
    return v


RESOLUTION_POINTS = 2.0


def default_blowup_threshold(dt: float, k: float, grid: Grid = None) -> float:
    """Amplitude beyond which the run no longer represents the equation.

    Two limits: the nonlinear phase advancing by more than pi per step, and
    (with a grid) a ground state of that peak amplitude being narrower than
    RESOLUTION_POINTS nodes.  A collapsing solution otherwise saturates at the
    grid scale instead of exceeding the phase limit.
    """
    amp = (np.pi / abs(dt)) ** (1.0 / (2 * k))
    if grid is not None:
        # phi_alpha(0) = alpha^{1/k} (k+1)^{1/2k}, width 1/(k alpha)
        alpha = 1.0 / (k * RESOLUTION_POINTS * grid.h)
        amp = min(amp, alpha ** (1.0 / k) * (k + 1) ** (1.0 / (2 * k)))
    return amp


class NLSStepper:
    """Strang step for i psi_t + psi_xx + |psi|^{2k} psi = 0."""

    def __init__(self, grid: Grid, k: float, dt: float, sponge=None, workers: int = 1):
        self.grid, self.k, self.dt = grid, float(k), float(dt)
        self.workers = workers
        self.lin = np.exp(-1j * dt * grid.xi ** 2)
        self.damp = None if sponge is None else np.exp(-abs(dt) * np.asarray(sponge))
        self._warned = False

    def nonlinear(self, psi, tau):
        return psi * np.exp(1j * tau * np.abs(psi) ** (2 * self.k))

    def step(self, psi):
        dt = self.dt
        psi = self.nonlinear(psi, 0.5 * dt)
        psi = sfft.ifft(self.lin * sfft.fft(psi, workers=self.workers), workers=self.workers)
        if self.damp is not None:
            psi = psi * self.damp
        return self.nonlinear(psi, 0.5 * dt)

    def check(self, psi, t=None, threshold=None):
        amp = float(np.max(np.abs(psi)))
        if not np.isfinite(amp):
            raise BlowUpError("non-finite field", t, amp)
        if threshold is not None and amp > threshold:
            raise BlowUpError(f"amplitude {amp:.3g} exceeds blow-up threshold {threshold:.3g}", t, amp)
        if not self._warned and abs(self.dt) * amp ** (2 * self.k) > 1.0:
            warnings.warn(f"dt*max|psi|^(2k) = {abs(self.dt) * amp ** (2 * self.k):.3g} > 1",
                          StabilityWarning, stacklevel=3)
            self._warned = True
        return amp


def step_nls(psi, dt: float, k: float, grid: Grid, sponge=None):
    """Single Strang step (half nonlinear, full linear with sponge, half nonlinear)."""
    st = NLSStepper(grid, k, dt, sponge)
    out = st.step(np.asarray(psi, dtype=complex))
    st.check(out)
    if abs(dt) * grid.xi.max() ** 2 > 1e4:
        warnings.warn("dt * max(xi^2) > 1e4: dispersive phase per step is large",
                      StabilityWarning, stacklevel=2)
    return out


def evolve_nls(psi0, grid: Grid, k: float, cfg: IntegratorConfig,
               callbacks: Sequence[Callable] = (), t0: float = 0.0) -> TrajectoryRecord:
    """Repeated Strang steps with diagnostics every ``cfg.stride`` steps.

    Callbacks are called as cb(t, psi) with a read-only view at each recorded time.
    """
    from .diagnostics import conserved_quantities

    stepper = NLSStepper(grid, k, cfg.dt, cfg.sponge_field(grid), cfg.workers)
    threshold = cfg.blowup_threshold or default_blowup_threshold(cfg.dt, k, grid)
    psi = np.array(psi0, dtype=complex)
    n = cfg.n_steps
    times = []
    diag = {"mass": [], "energy": [], "momentum": [], "linf": []}
    snaps = []

    def record(j):
        t = t0 + j * cfg.dt
        times.append(t)
        mass, energy, mom = conserved_quantities(psi, k, grid)
        diag["mass"].append(mass)
        diag["energy"].append(energy)
        diag["momentum"].append(mom)
        diag["linf"].append(float(np.max(np.abs(psi))))
        if cfg.snapshot_stride and j % cfg.snapshot_stride == 0:
            snaps.append((t, psi.copy()))
        ro = _readonly(psi)
        for cb in callbacks:
            cb(t, ro)

    stepper.check(psi, t0, threshold)
    record(0)
    for j in range(1, n + 1):
        psi = stepper.step(psi)
        if j % cfg.stride == 0 or j == n:
            stepper.check(psi, t0 + j * cfg.dt, threshold)
            record(j)
        elif j % 10 == 0:
            amp = np.max(np.abs(psi))
            if not np.isfinite(amp) or amp > threshold:
                stepper.check(psi, t0 + j * cfg.dt, threshold)
    rec = TrajectoryRecord(times, diag, snaps)
    rec.final = psi
    return rec


def charge_transfer_potential(config: MultiSolitonConfig, t: float, grid: Grid):
    """Entries (a, b) of the summed potential [[a, b], [-conj(b), -a]]."""
    k = config.k
    a = np.zeros(grid.N)
    b = np.zeros(grid.N, dtype=complex)
    x = grid.x
    for p in config.solitons:
        p2k = ground_state(p.alpha, k, x, p.y + p.v * t) ** (2 * k)
        theta = p.v * x / 2 - p.v ** 2 * t / 4 + p.alpha ** 2 * t + p.gamma
        a += (k + 1) * p2k
        b += k * np.exp(2j * theta) * p2k
    return a, b


def potential_exponential(a, b, tau: float):
    """Coefficients (c, s) with exp(i tau V) = c I + i s V, using V^2 = (a^2 - |b|^2) I."""
    mu = np.sqrt((a ** 2 - np.abs(b) ** 2).astype(complex))
    z = tau * mu
    small = np.abs(z) < 1e-4
    s = np.empty_like(z)
    s[small] = tau * (1 - z[small] ** 2 / 6)
    zb = z[~small]
    s[~small] = np.sin(zb) / mu[~small]
    return np.cos(z), s


class ChargeTransferStepper:
    """Strang step for i u_t + sigma_z u_xx + V(t, x) u = 0 with moving soliton potentials."""

    def __init__(self, grid: Grid, config: MultiSolitonConfig, dt: float, sponge=None,
                 workers: int = 1):
        self.grid, self.config, self.dt = grid, config, float(dt)
        self.workers = workers
        e = np.exp(-0.5j * dt * grid.xi ** 2)
        self.half = np.stack([e, np.conj(e)])
        self.damp = None if sponge is None else np.exp(-0.5 * abs(dt) * np.asarray(sponge))

    def linear_half(self, u):
        u = sfft.ifft(self.half * sfft.fft(u, axis=-1, workers=self.workers), axis=-1,
                      workers=self.workers)
        if self.damp is not None:
            u = u * self.damp
        return u

    def potential(self, u, t_mid):
        a, b = charge_transfer_potential(self.config, t_mid, self.grid)
        c, s = potential_exponential(a, b, self.dt)
        u1, u2 = u[0], u[1]
        return np.stack([c * u1 + 1j * s * (a * u1 + b * u2),
                         c * u2 + 1j * s * (-np.conj(b) * u1 - a * u2)])

    def step(self, u, t: float):
        u = self.linear_half(np.asarray(u, dtype=complex))
        u = self.potential(u, t + 0.5 * self.dt)
        return self.linear_half(u)


def step_charge_transfer(u, t: float, dt: float, config: MultiSolitonConfig, grid: Grid,
                         sponge=None):
    out = ChargeTransferStepper(grid, config, dt, sponge).step(u, t)
    if not np.all(np.isfinite(out)):
        raise BlowUpError("non-finite field in charge-transfer step", t + dt)
    return out


def evolve_charge_transfer(u0, grid: Grid, config: MultiSolitonConfig, cfg: IntegratorConfig,
                           callbacks: Sequence[Callable] = (), t0: float = 0.0,
                           every: Callable = None) -> TrajectoryRecord:
    """Linear charge-transfer evolution with norm diagnostics at each stride.

    ``every`` (optional) maps (t, u) to a new u after each recorded time, which
    lets callers re-apply a projection along the flow.
    """
    stepper = ChargeTransferStepper(grid, config, cfg.dt, cfg.sponge_field(grid), cfg.workers)
    u = np.array(u0, dtype=complex)
    times, norms, snaps = [], [], []
    for j in range(cfg.n_steps + 1):
        t = t0 + j * cfg.dt
        if j % cfg.stride == 0 or j == cfg.n_steps:
            if not np.all(np.isfinite(u)):
                raise BlowUpError("non-finite field in charge-transfer evolution", t)
            if every is not None:
                u = np.asarray(every(t, u), dtype=complex)
            times.append(t)
            norms.append(float(np.sqrt(grid.h * np.sum(np.abs(u) ** 2))))
            if cfg.snapshot_stride and j % cfg.snapshot_stride == 0:
                snaps.append((t, u.copy()))
            ro = _readonly(u)
            for cb in callbacks:
                cb(t, ro)
        if j < cfg.n_steps:
            u = stepper.step(u, t)
    rec = TrajectoryRecord(times, {"norm": norms}, snaps)
    rec.final = u
    return rec


def free_propagator(f, t: float, grid: Grid):
    """Exact solution of i u_t + u_xx = 0: multiplier exp(-i t xi^2)."""
    return np.fft.ifft(np.exp(-1j * t * grid.xi ** 2) * np.fft.fft(f, axis=-1), axis=-1)


def write_snapshot(path, psi, grid: Grid, t: float, fmt: str = "binary"):
    """Binary: magic, int64 N, float64 L, float64 t, then interleaved (Re, Im) float64.

    Text: three columns x, Re psi, Im psi preceded by a comment header.
    """
    psi = np.asarray(psi, dtype=complex)
    path = Path(path)
    if fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(SNAPSHOT_MAGIC, grid.N, grid.L, t))
            fh.write(psi.view(np.float64).astype("<f8").tobytes())
    elif fmt == "text":
        data = np.column_stack([grid.x, psi.real, psi.imag])
        np.savetxt(path, data, fmt="%.17e", delimiter=",",
                   header=f"N={grid.N} L={grid.L!r} t={t!r}\nx,re,im")
    else:
        raise ConfigError(f"unknown snapshot format {fmt!r}")


def read_snapshot(path):
    """Return (psi, grid, t) from a binary snapshot."""
    from .grid import make_grid

    raw = Path(path).read_bytes()
    magic, N, L, t = _HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC:
        raise ConfigError(f"{path}: not a snapshot file")
    vals = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if vals.size != 2 * N:
        raise ConfigError(f"{path}: truncated snapshot ({vals.size} values, expected {2 * N})")
    return vals.view(np.complex128).copy(), make_grid(L, N), t
