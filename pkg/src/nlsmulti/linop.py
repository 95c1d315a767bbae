"""Linearized matrix operator around a ground state and its discrete spectrum.

    H = [[A, -B], [B, -A]],  A = -d^2/dx^2 + alpha^2 - (k+1) phi^{2k},  B = k phi^{2k}

acting on two-component fields of shape (2, N).  The linear flow is
i w_t = H w, so the eigenvector Z_plus with H Z_plus = i lambda0 Z_plus grows
like exp(lambda0 t).  H = sigma_z L with L real symmetric; hence H is
self-adjoint for the pairing <f, sigma_z g>.
"""
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .errors import ConfigError, GridError, SpectralError
from .grid import Grid, fourier_eval, l2_norm, laplacian, make_grid, resample
from .solitons import ground_state_family

EDGE_TOL = 1e-10


@dataclass(eq=False)
class LinearizedOperator:
    alpha: float
    k: float
    grid: Grid
    phi: np.ndarray = field(repr=False)
    V1: np.ndarray = field(repr=False)   # (k+1) phi^{2k}
    V2: np.ndarray = field(repr=False)   # k phi^{2k}

    def apply(self, f):
        return apply_H(self, f)

    def dense(self) -> np.ndarray:
        """Real 2N x 2N matrix with the spectral second derivative."""
        N = self.grid.N
        D2 = np.fft.ifft(-self.grid.xi[:, None] ** 2 * np.fft.fft(np.eye(N), axis=0), axis=0).real
        A = -D2 + np.diag(self.alpha ** 2 - self.V1)
        B = np.diag(self.V2)
        return np.block([[A, -B], [B, -A]])


def assemble_H(alpha: float, k: float, grid: Grid) -> LinearizedOperator:
    if alpha <= 0:
        raise ConfigError(f"alpha must be positive, got {alpha}")
    fam = ground_state_family(alpha, k, grid.x)
    phi = fam.phi
    if max(phi[0], phi[-1]) > EDGE_TOL * phi.max():
        raise GridError(f"box too small for ground state decay at alpha={alpha}: "
                        f"edge value {max(phi[0], phi[-1]):.2e}")
    p2k = phi ** (2 * k)
    return LinearizedOperator(alpha, k, grid, phi, (k + 1) * p2k, k * p2k)


def apply_H(op: LinearizedOperator, f):
    f = np.asarray(f)
    if f.shape[-2:] != (2, op.grid.N):
        raise GridError(f"expected field of shape (2, {op.grid.N}), got {f.shape}")
    f1, f2 = f[..., 0, :], f[..., 1, :]
    a2 = op.alpha ** 2
    Af1 = -laplacian(f1, op.grid) + (a2 - op.V1) * f1
    Af2 = -laplacian(f2, op.grid) + (a2 - op.V1) * f2
    return np.stack([Af1 - op.V2 * f2, op.V2 * f1 - Af2], axis=-2)


def kernel_identities(op: LinearizedOperator) -> dict:
    """Residuals of the closed-form kernel and generalized-kernel relations.

    Each entry is ||H f - g|| / (alpha^2 ||f||), dimensionless under x -> alpha x.
    The Galilean relation is H(x phi, -x phi) = -2 (phi', phi').
    """
    fam = ground_state_family(op.alpha, op.k, op.grid.x)
    phi, dphi, da, xphi = fam.phi, fam.dphi, fam.dalpha, fam.xphi
    s = op.alpha ** 2
    cases = {
        "translation": (np.stack([dphi, dphi]), np.zeros((2, op.grid.N))),
        "phase": (np.stack([1j * phi, -1j * phi]), np.zeros((2, op.grid.N))),
        "scaling": (np.stack([da, da]), -2 * op.alpha * np.stack([phi, -phi])),
        "galilean": (np.stack([xphi, -xphi]), -2 * np.stack([dphi, dphi])),
    }
    out = {}
    for name, (f, g) in cases.items():
        r = apply_H(op, f) - g
        out[name] = l2_norm(r, op.grid) / (s * l2_norm(f, op.grid))
    return out


class RootBasis(NamedTuple):
    vectors: np.ndarray        # (4, 2, N), unit L2 norm
    raw: np.ndarray            # (4, 2, N), closed form, unnormalized
    norms: np.ndarray          # L2 norms of raw vectors
    h2_residuals: np.ndarray   # ||H^2 w|| / (alpha^4 ||w||)

    names = ("translation", "phase", "galilean", "scaling")


def root_vectors_raw(alpha: float, k: float, x) -> np.ndarray:
    """(phi', phi'), (i phi, -i phi), (i x phi, -i x phi), (d_alpha phi, d_alpha phi)."""
    fam = ground_state_family(alpha, k, x)
    return np.array([
        [fam.dphi, fam.dphi],
        [1j * fam.phi, -1j * fam.phi],
        [1j * fam.xphi, -1j * fam.xphi],
        [fam.dalpha, fam.dalpha],
    ], dtype=complex)


def root_basis(alpha: float, k: float, grid: Grid, op: LinearizedOperator = None) -> RootBasis:
    raw = root_vectors_raw(alpha, k, grid.x)
    norms = np.array([l2_norm(w, grid) for w in raw])
    vecs = raw / norms[:, None, None]
    op = op or assemble_H(alpha, k, grid)
    res = np.array([l2_norm(apply_H(op, apply_H(op, w)), grid) for w in vecs]) / alpha ** 4
    return RootBasis(vecs, raw, norms, res)


@dataclass(eq=False)
class SpectralData:
    alpha: float
    k: float
    grid: Grid
    lambda0: float
    z_plus: np.ndarray = field(repr=False)
    root: RootBasis = field(repr=False)
    eigen_residual: float = np.nan
    info: dict = field(default_factory=dict, repr=False)

    @property
    def z_minus(self) -> np.ndarray:
        return np.conj(self.z_plus)

    @property
    def root_residuals(self):
        return self.root.h2_residuals

    def static_frame(self) -> np.ndarray:
        """(6, 2, N): Z_plus, Z_minus and the four normalized root vectors."""
        return np.concatenate([self.z_plus[None], self.z_minus[None], self.root.vectors])

    def rescale(self, alpha: float, grid: Grid = None, polish: bool = True) -> "SpectralData":
        """Spectral data at another scale via x -> (alpha/alpha_ref) x.

        lambda0 scales as the square of the ratio; eigenvectors are evaluated
        by trigonometric interpolation and optionally refined by Newton.
        """
        grid = grid or self.grid
        if alpha == self.alpha and grid.same_as(self.grid):
            return self
        s = alpha / self.alpha
        pts = s * grid.x
        z = np.sqrt(s) * fourier_eval(self.z_plus, self.grid, pts)
        z[:, np.abs(pts) >= self.grid.L] = 0.0
        lam = self.lambda0 * s ** 2
        op = assemble_H(alpha, self.k, grid)
        if polish:
            lam, z, resid = _newton_refine(op, 1j * lam, z)
        else:
            z = conj_pair_normalize(z, grid)
            resid = eigen_residual(op, lam, z)
        return SpectralData(alpha, self.k, grid, lam, z, root_basis(alpha, self.k, grid, op),
                            resid, {"rescaled_from": self.alpha, "polished": polish})


def eigen_residual(op: LinearizedOperator, lambda0: float, z) -> float:
    return l2_norm(apply_H(op, z) - 1j * lambda0 * z, op.grid) / l2_norm(z, op.grid)


def conj_pair_normalize(z, grid: Grid) -> np.ndarray:
    """Rotate an eigenvector of i*lambda0 into the form (P + iQ, P - iQ).

    The swap symmetry maps Z_plus to a multiple of conj(Z_plus); the phase is
    chosen to make that multiple one, the norm is set to one and the sign
    makes Re z1 positive where |z1| peaks.
    """
    z = np.asarray(z, dtype=complex)
    z1, z2 = z[0], z[1]
    c = np.vdot(np.conj(z1), z2) / np.vdot(z1, z1)  # z2 ~ c conj(z1)
    c = c / abs(c)
    z = z * np.sqrt(1.0 / c)
    z = z / l2_norm(z, grid)
    j = np.argmax(np.abs(z[0]))
    if z[0, j].real < 0:
        z = -z
    return z


def _localization(v, grid: Grid, alpha: float, radius: float = 8.0) -> float:
    inside = np.abs(grid.x) <= radius / alpha
    tot = np.sum(np.abs(v) ** 2)
    return float(np.sum(np.abs(v[..., inside]) ** 2) / tot) if tot > 0 else 0.0


def dense_spectrum(op: LinearizedOperator, vectors: bool = True):
    H = op.dense()
    if vectors:
        w, V = sla.eig(H)
        return w, V.T.reshape(-1, 2, op.grid.N)
    return sla.eigvals(H), None


def _dense_candidates(op: LinearizedOperator, re_tol: float, im_min: float, loc_min: float):
    w, V = dense_spectrum(op)
    cands = []
    for lam, v in zip(w, V):
        loc = _localization(v, op.grid, op.alpha)
        cands.append((lam, loc))
    good = [(lam, v) for (lam, loc), v in zip(cands, V)
            if abs(lam.real) <= re_tol and lam.imag > im_min and loc >= loc_min]
    return good, cands


def _newton_refine(op: LinearizedOperator, mu, z, tol: float = 1e-12, max_iter: int = 20):
    """Bordered Newton iteration for (H - mu) z = 0, <z, c> = 1.

    Linear solves use GMRES preconditioned by the Fourier diagonal of
    sigma_z(-d^2 + alpha^2) - mu, which differs from H - mu by a localized
    potential.
    """
    grid = op.grid
    N = grid.N
    a2 = op.alpha ** 2
    z = conj_pair_normalize(z, grid)
    c = z.copy()
    xi2 = grid.xi ** 2
    hist = []
    for it in range(max_iter):
        r = apply_H(op, z) - mu * z
        nr = l2_norm(r, grid)
        hist.append(nr)
        if nr <= tol * max(1.0, abs(mu)):
            break
        d1 = xi2 + a2 - mu
        d2 = -(xi2 + a2) - mu

        def prec(v):
            v = np.asarray(v).ravel()
            out = np.empty_like(v, dtype=complex)
            out[:N] = np.fft.ifft(np.fft.fft(v[:N]) / d1)
            out[N:2 * N] = np.fft.ifft(np.fft.fft(v[N:2 * N]) / d2)
            out[-1] = v[-1]
            return out

        zf = z.ravel()
        cf = c.ravel()

        def mat(v):
            v = np.asarray(v).ravel()
            dz = v[:-1].reshape(2, N)
            dm = v[-1]
            top = (apply_H(op, dz) - mu * dz).ravel() - dm * zf
            bot = grid.h * np.vdot(cf, v[:-1])
            return np.concatenate([top, [bot]])

        n = 2 * N + 1
        J = spla.LinearOperator((n, n), matvec=mat, dtype=complex)
        M = spla.LinearOperator((n, n), matvec=prec, dtype=complex)
        rhs = -np.concatenate([r.ravel(), [grid.h * np.vdot(cf, zf) - 1.0]])
        sol, info = spla.gmres(J, rhs, M=M, rtol=1e-14, atol=0.0, restart=200, maxiter=20)
        z = z + sol[:-1].reshape(2, N)
        mu = mu + sol[-1]
    lam = float(mu.imag)
    z = conj_pair_normalize(z, grid)
    return lam, z, eigen_residual(op, lam, z)


def discrete_spectrum(op: LinearizedOperator, search_radius: float = None,
                      dense_max: int = 1024, re_tol: float = 1e-6, loc_min: float = 0.9,
                      refine: bool = True) -> SpectralData:
    """Locate the unstable eigenpair H Z_plus = i lambda0 Z_plus.

    Small grids are solved densely.  Larger grids are seeded by a dense solve
    on a box of half-width about 24/alpha with 768 nodes, transferred by
    trigonometric interpolation and refined by Newton on the target grid.
    Continuum artifacts are rejected by |Re lambda|, a minimum imaginary part
    of 0.01 alpha^2 and a localization ratio.
    """
    alpha = op.alpha
    grid = op.grid
    im_min = 0.01 * alpha ** 2
    if search_radius is None:
        search_radius = 100.0 * alpha ** 2
    if grid.N <= dense_max:
        seed_op = op
    else:
        Ls = min(grid.L, 24.0 / alpha)
        Ns = 768 if Ls < grid.L else min(grid.N, dense_max)
        seed_op = assemble_H(alpha, op.k, make_grid(Ls, Ns))
    good, cands = _dense_candidates(seed_op, re_tol * max(1.0, alpha ** 2), im_min, loc_min)
    good = [(lam, v) for lam, v in good if abs(lam) <= search_radius]
    if not good:
        near = sorted(cands, key=lambda c: -abs(c[0].imag))[:6]
        raise SpectralError("no localized purely imaginary eigenvalue found",
                            [(complex(l), float(loc)) for l, loc in near])
    lam, v = max(good, key=lambda c: c[0].imag)
    info = {"seed_grid": (seed_op.grid.L, seed_op.grid.N), "seed_lambda": complex(lam),
            "n_candidates": len(good)}
    z0 = resample(v, seed_op.grid, grid) if seed_op is not op else v
    if refine:
        lam0, z, resid = _newton_refine(op, 1j * lam.imag, z0)
    else:
        lam0 = float(lam.imag)
        z = conj_pair_normalize(z0, grid)
        resid = eigen_residual(op, lam0, z)
    return SpectralData(alpha, op.k, grid, lam0, z, root_basis(alpha, op.k, grid, op), resid, info)


def spectral_symmetry_defect(eigenvalues, tol_match: float = 1e-6, cutoff: float = None) -> float:
    """Largest distance from lambda in {-lambda, conj(lambda), -conj(lambda)} to the set.

    Applied to the eigenvalues with |lambda| <= cutoff (the well-resolved part).
    """
    w = np.asarray(eigenvalues)
    if cutoff is not None:
        w = w[np.abs(w) <= cutoff]
    worst = 0.0
    for lam in w:
        for img in (-lam, np.conj(lam), -np.conj(lam)):
            worst = max(worst, float(np.min(np.abs(w - img))))
    return worst


def essential_spectrum_report(op: LinearizedOperator, eigenvalues=None, re_tol: float = 1e-6) -> dict:
    """Classify dense eigenvalues: continuum (real, |lambda| >= alpha^2) vs discrete."""
    if eigenvalues is None:
        eigenvalues, _ = dense_spectrum(op, vectors=False)
    w = np.asarray(eigenvalues)
    a2 = op.alpha ** 2
    real = np.abs(w.imag) <= re_tol * max(1.0, a2) * 1e3
    cont = real & (np.abs(w.real) >= a2 * (1 - 1e-3))
    gap_real = w[real & ~cont]
    off_axis = w[~real]
    return {"alpha2": a2, "n_total": w.size, "n_continuum": int(cont.sum()),
            "min_abs_continuum": float(np.min(np.abs(w[cont].real))) if cont.any() else np.nan,
            "in_gap_real": gap_real, "off_axis": off_axis}


def growth_rate_from_evolution(op: LinearizedOperator, t_max: float = 4.0, dt: float = 1e-3,
                               initial="random", observable: str = "unstable",
                               spectral: SpectralData = None, seed: int = 0,
                               window=None) -> dict:
    """Growth rate of the linear flow around a static soliton by time stepping.

    The charge-transfer integrator propagates the perturbation in the lab frame;
    ``observable`` selects what is fitted against t: "unstable" |b_plus|,
    "stable" |b_minus|, "norm" ||u|| or "non_unstable" ||u - b_plus Z_plus||.
    The fit window defaults to [t_max/2, t_max].
    """
    from .evolve import ChargeTransferStepper
    from .projections import build_frame, decompose
    from .solitons import single

    grid = op.grid
    cfg = single(op.alpha, op.k)
    spectral = spectral or discrete_spectrum(op)
    if isinstance(initial, str):
        if initial == "random":
            rng = np.random.default_rng(seed)
            env = np.exp(-(op.alpha * grid.x) ** 2 / 2)
            modes = sum(rng.normal() * np.cos(j * op.alpha * grid.x + rng.uniform(0, 2 * np.pi))
                        for j in range(4))
            u = env * (modes + 1j * sum(rng.normal() * np.sin(j * op.alpha * grid.x) for j in range(1, 4)))
            u0 = np.stack([u, np.conj(u)])
        elif initial == "z_plus":
            u0 = spectral.z_plus.copy()
        elif initial == "z_minus":
            u0 = spectral.z_minus.copy()
        elif initial == "root":
            u0 = spectral.root.vectors.sum(axis=0)
        else:
            raise ConfigError(f"unknown initial data {initial!r}")
    else:
        u0 = np.asarray(initial, dtype=complex)
    stepper = ChargeTransferStepper(grid, cfg, dt)
    n = int(round(t_max / dt))
    stride = max(1, int(round(0.05 / dt)))
    ts, vals = [], []
    u = u0.astype(complex)
    log_scale = 0.0
    spec = {op.alpha: spectral}
    for j in range(n + 1):
        t = j * dt
        if j % stride == 0:
            frame = build_frame(cfg, spec, t, grid)
            dec = decompose(u, frame)
            if observable == "unstable":
                val = abs(dec.b_plus[0])
            elif observable == "stable":
                val = abs(dec.b_minus[0])
            elif observable == "norm":
                val = l2_norm(u, grid)
            elif observable == "non_unstable":
                val = l2_norm(u - dec.b_plus[0] * frame.vectors[0], grid)
            else:
                raise ConfigError(f"unknown observable {observable!r}")
            ts.append(t)
            vals.append(np.log(max(val, 1e-300)) + log_scale)
            nu = l2_norm(u, grid)
            if nu > 1e6:
                u = u / nu
                log_scale += np.log(nu)
        if j < n:
            u = stepper.step(u, t)
    ts = np.array(ts)
    vals = np.array(vals)
    lo, hi = window if window is not None else (t_max / 2, t_max)
    sel = (ts >= lo - 1e-12) & (ts <= hi + 1e-12)
    if sel.sum() < 5:
        raise ConfigError("fit window too short for a growth-rate fit")
    slope, icpt = np.polyfit(ts[sel], vals[sel], 1)
    return {"rate": float(slope), "intercept": float(icpt), "times": ts, "log_values": vals,
            "lambda0": spectral.lambda0, "observable": observable}
