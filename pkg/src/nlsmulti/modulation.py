"""Modulation parameters: psi = Q_sigma + u with u symplectically orthogonal to
the lifted root vectors of every soliton.

Instantaneous parameters are used throughout: soliton l is
exp(i(v x/2 + gamma)) phi_alpha(x - y), i.e. ``multi_soliton(config, 0, x)``.
For a physical state (u, conj u) the pairing with sigma_z (w, conj w) is
2i Im int u conj(w), so each constraint is one real equation.
"""
import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ExtractionError
from .grid import Grid, l2_norm
from .solitons import (MultiSolitonConfig, ground_state_family, ground_state_second,
                       multi_soliton)

NEWTON_MAX_ITER = 50
NEWTON_DAMPING = 0.5


@dataclass
class ModulationState:
    config: MultiSolitonConfig
    u: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)
    iterations: int = 0
    t: float = 0.0

    @property
    def residual_norm(self) -> float:
        return float(np.max(np.abs(self.residuals))) if self.residuals.size else 0.0


def _soliton_pieces(p, k, x):
    s = x - p.y
    e = np.exp(1j * (p.v * x / 2 + p.gamma))
    fam = ground_state_family(p.alpha, k, s)
    return s, e, fam


def constraint_vectors(config: MultiSolitonConfig, x) -> np.ndarray:
    """w_{l,i} = exp(i(v x/2 + gamma)) z_i(x - y), z = (phi', i phi, i s phi, d_alpha phi)."""
    out = []
    for p in config.solitons:
        s, e, fam = _soliton_pieces(p, config.k, x)
        out.append(e * np.array([fam.dphi, 1j * fam.phi, 1j * s * fam.phi, fam.dalpha]))
    return np.array(out)


def constraint_residuals(psi, config: MultiSolitonConfig, grid: Grid) -> np.ndarray:
    u = psi - multi_soliton(config, 0.0, grid.x)
    w = constraint_vectors(config, grid.x)
    return grid.h * np.imag(np.conj(w) @ u).ravel()


def _q_derivatives(p, k, x):
    """dQ/d(v, y, alpha, gamma) for one soliton."""
    s, e, fam = _soliton_pieces(p, k, x)
    q = e * fam.phi
    return np.array([0.5j * x * q, -e * fam.dphi, e * fam.dalpha, 1j * q])


def _w_derivatives(p, k, x):
    """dw_i/d(v, y, alpha, gamma), shape (4 params, 4 vectors, N)."""
    s, e, fam = _soliton_pieces(p, k, x)
    phi_xx, da_x, da_a = ground_state_second(p.alpha, k, s)
    z = np.array([fam.dphi, 1j * fam.phi, 1j * s * fam.phi, fam.dalpha])
    z_s = np.array([phi_xx, 1j * fam.dphi, 1j * (fam.phi + s * fam.dphi), da_x])
    z_a = np.array([da_x, 1j * fam.dalpha, 1j * s * fam.dalpha, da_a])
    w = e * z
    return np.array([0.5j * x * w, -e * z_s, e * z_a, 1j * w])


def constraint_jacobian(psi, config: MultiSolitonConfig, grid: Grid, method: str = "analytic",
                        fd_step: float = 1e-6) -> np.ndarray:
    """d residual_{l,i} / d sigma_{j,p}, shape (4m, 4m), parameters ordered (v, y, alpha, gamma)."""
    m, k, x = config.m, config.k, grid.x
    if method == "fd":
        sig = config.as_array()
        J = np.empty((4 * m, 4 * m))
        for j in range(4 * m):
            hstep = fd_step * max(1.0, abs(sig[j]))
            sp, sm = sig.copy(), sig.copy()
            sp[j] += hstep
            sm[j] -= hstep
            J[:, j] = (constraint_residuals(psi, config.with_array(sp), grid)
                       - constraint_residuals(psi, config.with_array(sm), grid)) / (2 * hstep)
        return J
    if method != "analytic":
        raise ConfigError(f"unknown Jacobian method {method!r}")
    u = psi - multi_soliton(config, 0.0, x)
    w = constraint_vectors(config, x)                       # (m, 4, N)
    J = np.zeros((4 * m, 4 * m))
    for j, p in enumerate(config.solitons):
        dq = _q_derivatives(p, k, x)                        # (4, N)
        # -dQ paired against every constraint vector
        J[:, 4 * j:4 * j + 4] = -grid.h * np.imag(np.conj(w.reshape(4 * m, -1)) @ dq.T)
        dw = _w_derivatives(p, k, x)                        # (4 params, 4 vectors, N)
        J[4 * j:4 * j + 4, 4 * j:4 * j + 4] += grid.h * np.imag(np.conj(dw) @ u).T
    return J


def extract_parameters(psi, guess: MultiSolitonConfig, grid: Grid, tol: float = 1e-10,
                       max_iter: int = NEWTON_MAX_ITER, jacobian: str = "analytic",
                       t: float = 0.0) -> ModulationState:
    """Newton iteration on the 4m orthogonality conditions.

    Converged when max |residual| <= tol * ||psi||.  A step that increases the
    residual (or makes some alpha nonpositive) is damped by 0.5 repeatedly.
    """
    psi = np.asarray(psi, dtype=complex)
    scale = max(l2_norm(psi, grid), 1e-300)
    cfg = guess
    F = constraint_residuals(psi, cfg, grid)
    fn = np.max(np.abs(F))
    best = (fn, cfg)
    it = 0
    while fn > tol * scale:
        if it >= max_iter:
            raise ExtractionError(f"Newton did not converge in {max_iter} iterations "
                                  f"(residual {fn:.3e})", fn, best[1], t)
        J = constraint_jacobian(psi, cfg, grid, jacobian)
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise ExtractionError(f"singular constraint Jacobian: {exc}", fn, best[1], t)
        sig = cfg.as_array()
        lam = 1.0
        for _ in range(30):
            trial = sig + lam * step
            alphas = trial.reshape(-1, 4)[:, 2]
            if np.all(alphas > 0) and np.all(np.isfinite(trial)):
                try:
                    cand = cfg.with_array(trial)
                except ConfigError:
                    cand = None
                if cand is not None:
                    Fc = constraint_residuals(psi, cand, grid)
                    if np.max(np.abs(Fc)) < fn or lam < 1e-6:
                        break
            lam *= NEWTON_DAMPING
        else:
            raise ExtractionError("line search failed", fn, best[1], t)
        if cand is None:
            raise ExtractionError("parameters left the admissible set", fn, best[1], t)
        cfg, F = cand, Fc
        fn = np.max(np.abs(F))
        if fn < best[0]:
            best = (fn, cfg)
        it += 1
        if lam < 1e-6 and fn > tol * scale:
            raise ExtractionError("Newton stagnated", fn, best[1], t)
    u = psi - multi_soliton(cfg, 0.0, grid.x)
    return ModulationState(cfg, u, F, it, t)


class ModulationTracker:
    """Callback for evolve_nls: warm-started extraction at every recorded time.

    The previous parameters advanced along the free trajectory serve as the
    Newton guess.  A jump larger than ``jump_bound`` in any parameter (after
    this prediction) is treated as a tube exit.
    """

    def __init__(self, sigma0: MultiSolitonConfig, grid: Grid, jump_bound: float = 0.5,
                 tol: float = 1e-10, jacobian: str = "analytic"):
        self.grid = grid
        self.jump_bound = jump_bound
        self.tol = tol
        self.jacobian = jacobian
        self.states = []
        self._guess = sigma0
        self._t = None

    def __call__(self, t, psi):
        guess = self._guess
        if self._t is not None:
            guess = guess.advanced(t - self._t)
        st = extract_parameters(psi, guess, self.grid, self.tol, jacobian=self.jacobian, t=t)
        jump = np.max(np.abs(st.config.as_array() - guess.as_array()))
        if self.states and jump > self.jump_bound:
            raise ExtractionError(f"parameter jump {jump:.3g} exceeds bound {self.jump_bound}",
                                  st.residual_norm, st.config, t)
        self.states.append(st)
        self._guess = st.config
        self._t = t
        return st


def track_modulation(times, fields, sigma0: MultiSolitonConfig, grid: Grid, **kw):
    tr = ModulationTracker(sigma0, grid, **kw)
    for t, psi in zip(times, fields):
        tr(t, psi)
    return tr.states


@dataclass
class LambdaDot:
    times: np.ndarray
    y: np.ndarray        # (n, m): dy/dt - v
    v: np.ndarray        # dv/dt
    alpha: np.ndarray    # dalpha/dt
    gamma: np.ndarray    # dgamma/dt - alpha^2 + v^2/4 + y dv/dt / 2

    def max_abs(self) -> np.ndarray:
        """max over solitons and components at each time."""
        return np.max(np.abs(np.stack([self.y, self.v, self.alpha, self.gamma])), axis=(0, 2))


def parameter_series(states):
    times = np.array([s.t for s in states])
    P = np.array([s.config.as_array().reshape(-1, 4) for s in states])   # (n, m, 4)
    return times, P


def lambda_dot(states, frequency_offset: float = 0.0) -> LambdaDot:
    """Gauge-corrected parameter velocities by centered differences.

    ``frequency_offset`` is added to the free phase speed alpha^2; a time-discrete
    flow rotates its solitary waves at a slightly shifted frequency.
    """
    if len(states) < 3:
        raise ConfigError("lambda_dot needs at least three states")
    times, P = parameter_series(states)
    v, y, a, g = P[..., 0], P[..., 1], P[..., 2], P[..., 3]
    d = lambda f: np.gradient(f, times, axis=0)
    vd = d(v)
    return LambdaDot(times, d(y) - v, vd, d(a),
                     d(g) - a ** 2 - frequency_offset + v ** 2 / 4 + y * vd / 2)


def write_modulation_csv(path, states, ld: LambdaDot = None):
    ld = ld or (lambda_dot(states) if len(states) >= 3 else None)
    m = states[0].config.m
    header = ["t"]
    for ell in range(1, m + 1):
        header += [f"v{ell}", f"y{ell}", f"alpha{ell}", f"gamma{ell}",
                   f"Ly{ell}", f"Lv{ell}", f"Lalpha{ell}", f"Lgamma{ell}"]
    header += ["residual", "u_l2"]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for n, st in enumerate(states):
            row = [repr(float(st.t))]
            for ell, p in enumerate(st.config.solitons):
                row += [repr(float(z)) for z in (p.v, p.y, p.alpha, p.gamma)]
                if ld is not None:
                    row += [repr(float(arr[n, ell])) for arr in (ld.y, ld.v, ld.alpha, ld.gamma)]
                else:
                    row += ["nan"] * 4
            row += [repr(st.residual_norm), repr(float(np.sqrt(np.sum(np.abs(st.u) ** 2))))]
            wr.writerow(row)
