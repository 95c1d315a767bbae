"""Command line entry point: spectrum, simulate, shoot, verify.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure (blow-up,
spectral or shooting failure), 4 verifier failure.  CSV outputs contain no
time stamps; those live only in metadata.json.
"""
import argparse
import contextlib
import csv
import json
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import __version__
from . import config as rc
from . import diagnostics as dg
from .errors import (BlowUpError, ConfigError, ExtractionError, NLSMultiError, NumericalError,
                     ShootingError, SpectralError, VerifierFailure)
from .evolve import IntegratorConfig, evolve_nls, write_snapshot
from .linop import assemble_H, discrete_spectrum, kernel_identities
from .modulation import ModulationTracker, lambda_dot, write_modulation_csv
from .projections import SpectralLibrary
from .solitons import multi_soliton

LAMBDA0_RTOL = 1e-6


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, complex):
        return repr(v)
    return str(v)


class Collector:
    """Single writer for all run outputs; files are written in call order."""

    def __init__(self, out):
        self.out = out
        os.makedirs(out, exist_ok=True)
        self.files = []
        self.summary = []

    def path(self, name):
        self.files.append(name)
        return os.path.join(self.out, name)

    def csv(self, name, header, rows):
        with open(self.path(name), "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(header)
            for r in rows:
                wr.writerow([_fmt(v) for v in r])

    def line(self, text=""):
        self.summary.append(text)

    def finish(self, command, cfg, status, argv):
        with open(os.path.join(self.out, "summary.txt"), "w") as fh:
            fh.write("\n".join(self.summary) + "\n")
        with open(os.path.join(self.out, "config.yaml"), "w") as fh:
            fh.write(rc.dumps(cfg))
        meta = {"command": command, "status": status, "version": __version__,
                "argv": list(argv), "files": self.files + ["summary.txt", "config.yaml"],
                "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z")}
        with open(os.path.join(self.out, "metadata.json"), "w") as fh:
            json.dump(meta, fh, indent=2)


def _library(cfg: rc.RunConfig, grid, alpha=None):
    alpha = alpha if alpha is not None else cfg.multi_soliton().solitons[0].alpha
    return SpectralLibrary.compute(alpha, cfg.k, grid)


def build_perturbation(cfg: rc.RunConfig, grid, spectral=None, orthogonal=False):
    """r0 from the perturbation section; ``orthogonal`` removes the discrete components."""
    from .shooting import physical_perturbation, unstable_lifts

    pert = cfg.perturbation
    sig = cfg.multi_soliton()
    if pert.shape == "none" or pert.amplitude == 0:
        return np.zeros(grid.N, dtype=complex)
    if pert.shape == "unstable":
        spectral = spectral or _library(cfg, grid)
        z = unstable_lifts(sig, spectral, grid)[0]
        from .grid import l2_norm
        return pert.amplitude * z / l2_norm(z, grid)
    if orthogonal:
        spectral = spectral or _library(cfg, grid)
        return physical_perturbation(grid, sig, spectral, pert.amplitude, pert.width, pert.center,
                                     pert.shape, cfg.seed)
    c = sig.solitons[0].y if pert.center is None else pert.center
    env = np.exp(-((grid.x - c) / pert.width) ** 2)
    if pert.shape == "random":
        rng = np.random.default_rng(cfg.seed)
        env = env * (rng.normal() + 1j * rng.normal() + rng.normal() * np.cos(grid.x - c))
    from .grid import l2_norm
    return pert.amplitude * env / l2_norm(env, grid)


def cmd_spectrum(cfg: rc.RunConfig, col: Collector, threads=1) -> int:
    grid = cfg.make_grid()
    alpha = cfg.spectrum.alpha
    op = assemble_H(alpha, cfg.k, grid)
    sd = discrete_spectrum(op)
    kid = kernel_identities(op)
    h2 = dict(zip(("translation", "phase", "galilean", "scaling"), sd.root.h2_residuals))
    col.csv("eigenpair.csv", ["x", "re_z1", "im_z1", "re_z2", "im_z2"],
            zip(grid.x, sd.z_plus[0].real, sd.z_plus[0].imag, sd.z_plus[1].real, sd.z_plus[1].imag))
    rows = []
    for j, name in enumerate(h2):
        rows.append([name, sd.root.norms[j]])
    col.csv("root_basis.csv", ["vector", "raw_l2_norm"], rows)
    report = [("lambda0", sd.lambda0), ("eigen_residual", sd.eigen_residual)]
    report += [(f"kernel_{k}", v) for k, v in kid.items()]
    report += [(f"h2_{k}", v) for k, v in h2.items()]
    col.csv("spectrum.csv", ["quantity", "value"], report)
    col.line(f"alpha = {alpha!r}, k = {cfg.k!r}, grid L = {grid.L!r}, N = {grid.N}")
    col.line(f"lambda0 = {sd.lambda0!r}")
    col.line(f"lambda0 / alpha^2 = {sd.lambda0 / alpha ** 2!r}")
    worst = max([sd.eigen_residual] + list(kid.values()) + list(h2.values()))
    col.line(f"max residual = {worst:.3e} (tolerance {cfg.spectrum.tolerance:.1e})")
    if worst > cfg.spectrum.tolerance:
        raise SpectralError(f"residuals {worst:.3e} exceed tolerance {cfg.spectrum.tolerance:.1e}; "
                            "grid too coarse or box too small", [complex(0, sd.lambda0)])
    ref = cfg.spectrum.lambda0_reference
    if ref is not None:
        ref = ref * alpha ** 2
        rel = abs(sd.lambda0 - ref) / ref
        col.line(f"reference lambda0 = {ref!r}, relative difference = {rel:.3e}")
        if rel > LAMBDA0_RTOL:
            raise VerifierFailure(f"lambda0 differs from reference by {rel:.3e}")
    return 0


def cmd_simulate(cfg: rc.RunConfig, col: Collector, threads=1) -> int:
    grid = cfg.make_grid()
    sig = cfg.multi_soliton()
    ic = cfg.integrator
    r0 = build_perturbation(cfg, grid)
    psi0 = multi_soliton(sig, 0.0, grid.x) + r0
    stride = max(1, int(round(ic.record_every / ic.dt)))
    snap = int(round(ic.snapshot_every / ic.dt)) if ic.snapshot_every else 0
    icfg = IntegratorConfig(ic.dt, ic.t_end, ic.sponge, ic.sponge_width, ic.sponge_strength,
                            stride, snap, workers=threads)
    tracker = ModulationTracker(sig, grid)
    lost = []

    def track(t, psi):
        # once tracking is lost keep evolving: a collapse should surface as blow-up
        if lost:
            return
        try:
            tracker(t, psi)
        except ExtractionError as exc:
            lost.append(exc)
            col.line(f"modulation tracking lost at t = {exc.t!r} (residual {float(exc.residual or np.nan):.3e})")

    col.line(f"solitons = {len(cfg.solitons)}, k = {cfg.k!r}, dt = {ic.dt!r}, t_end = {ic.t_end!r}")
    try:
        rec = evolve_nls(psi0, grid, cfg.k, icfg, callbacks=[track])
    except BlowUpError as exc:
        col.line(f"blow-up at t = {exc.t!r}: max |psi| = {exc.max_amplitude!r}")
        _write_tracking(col, tracker)
        raise
    d = rec.diagnostics
    col.csv("trajectory.csv", ["t", "mass", "energy", "momentum", "linf"],
            zip(rec.times, d["mass"], d["energy"], d["momentum"], d["linf"]))
    lmax = _write_tracking(col, tracker)
    for j, (t, psi) in enumerate(rec.snapshots):
        write_snapshot(col.path(f"snapshot_{j:05d}.bin"), psi, grid, t)
    m = np.asarray(d["mass"])
    e = np.asarray(d["energy"])
    col.line(f"mass drift = {abs(m[-1] - m[0]) / m[0]:.3e}")
    col.line(f"energy drift = {abs(e[-1] - e[0]) / abs(e[0]):.3e}")
    if lmax is not None:
        col.line(f"max |Lambda sigma_dot| = {lmax:.3e}")
    if lost:
        raise lost[0]
    return 0


def _write_tracking(col, tracker):
    if len(tracker.states) < 3:
        return None
    ld = lambda_dot(tracker.states)
    write_modulation_csv(col.path("modulation.csv"), tracker.states, ld)
    return float(np.max(ld.max_abs()))


def shot_spec(cfg: rc.RunConfig, grid=None, spectral=None):
    from .shooting import ShotSpec

    grid = grid or cfg.make_grid()
    spectral = spectral or _library(cfg, grid)
    sh, ic = cfg.shooting, cfg.integrator
    r0 = build_perturbation(cfg, grid, spectral, orthogonal=True)
    return ShotSpec(r0, cfg.multi_soliton(), grid, T=sh.T, tol=sh.tol, dt=ic.dt, solver=sh.solver,
                    spectral=spectral, window=sh.window, segment=sh.segment, ladder=tuple(sh.ladder),
                    sponge=ic.sponge, sponge_width=ic.sponge_width,
                    sponge_strength=ic.sponge_strength, record_every=ic.record_every)


def _history_rows(history):
    for i, hrec in enumerate(history):
        yield [i, hrec["node"], hrec["t0"], hrec["horizon"], float(np.real(hrec["h"][0])),
               float(np.max(np.abs(hrec["b"]))), hrec["status"]]


HISTORY_HEADER = ["iteration", "node", "t0", "horizon", "h", "abs_b_plus", "status"]


def cmd_shoot(cfg: rc.RunConfig, col: Collector, threads=1) -> int:
    from .shooting import dichotomy, discrete_frequency_offset, manifold_scan, shoot

    spec = shot_spec(cfg)
    sh = cfg.shooting
    col.line(f"solitons = {spec.sigma0.m}, T = {spec.T!r}, tol = {spec.tol:.1e}, dt = {spec.dt!r}")
    col.line(f"|r0|_2 = {np.sqrt(spec.grid.h) * np.linalg.norm(spec.r0):.6e}")
    try:
        res = shoot(spec)
    except ShootingError as exc:
        col.csv("bracketing.csv", HISTORY_HEADER, _history_rows(exc.history))
        col.line(f"shooting failed: {exc}")
        raise
    col.csv("shot_history.csv", HISTORY_HEADER, _history_rows(res.history))
    m = spec.sigma0.m
    col.csv("shot_trajectory.csv",
            ["t", "linf", "local", "l2", "mass", "energy"] + [f"b_plus{j + 1}" for j in range(m)],
            [[t] + [res.diagnostics[k][i] for k in ("linf", "local", "l2", "mass", "energy")]
             + [float(b.real) for b in res.diagnostics["b_plus"][i]]
             for i, t in enumerate(res.times)])
    write_modulation_csv(col.path("modulation.csv"), res.states)
    col.line(f"h* = {[float(np.real(h)) for h in res.h_star]}")
    col.line(f"|b_plus(T)| = {float(np.max(np.abs(res.b_plus_T))):.3e}")
    col.line(f"success = {res.success}")
    col.line(f"sensitivity rank = {res.sensitivity.get('rank')} of {2 * m} real unknowns")
    col.line(f"ladder horizons = {[round(h, 6) for h in res.ladder['horizons']]}")
    col.line(f"ladder ratios rho = {[float(r) for r in res.ladder['rho']]}")
    col.line(f"max node defect = {float(np.max(res.defects)) if len(res.defects) else 0.0:.3e}")
    mass = res.diagnostics["mass"]
    col.line(f"mass drift = {abs(mass[-1] - mass[0]) / mass[0]:.3e}")
    hi = min(30.0, spec.T)
    if hi > 4.0:
        off = discrete_frequency_offset(spec)
        fits = res.decay_fits((2.0, hi), off)
        col.line(f"[decay fits on t in [2, {hi!r}]]")
        col.line(f"discrete frequency offset = {off!r}")
        for key, f in fits.items():
            col.line(f"{key} exponent = {f.exponent!r}")
    if sh.scan:
        scan = manifold_scan(spec, sh.scan, workers=threads)
        r0n = float(np.sqrt(spec.grid.h) * np.linalg.norm(spec.r0))
        col.csv("manifold_scan.csv", ["s", "r0_l2", "h_star"],
                [[r["s"], r["s"] * r0n, r["h"]] for r in scan["rows"]])
        col.line("[manifold scan]")
        col.line(f"baseline h*(0) = {scan['h0']!r}")
        col.line(f"quadratic fit exponent = {scan['exponent']!r}")
        col.line(f"max Lipschitz quotient = {scan['lipschitz_max']!r}")
    if sh.dichotomy_offset > 0:
        dd = dichotomy(spec, res.h_star, sh.dichotomy_offset, sh.dichotomy_time)
        col.line("[dichotomy]")
        col.line(f"h* + {sh.dichotomy_offset!r}: {dd['plus']['side']} at t = {dd['plus']['t']!r}")
        col.line(f"h* - {sh.dichotomy_offset!r}: {dd['minus']['side']} at t = {dd['minus']['t']!r}")
        col.line(f"dichotomy = {dd['dichotomy']}")
    if not res.success:
        raise ShootingError("terminal unstable coefficient above tolerance", res.history)
    return 0


@contextlib.contextmanager
def tolerance_override(overrides):
    saved = dict(dg.TOLERANCES)
    try:
        for k, v in (overrides or {}).items():
            if k not in dg.TOLERANCES:
                raise ConfigError(f"unknown tolerance {k!r}")
            dg.TOLERANCES[k] = tuple(v) if isinstance(v, (list, tuple)) else v
        yield dg.TOLERANCES
    finally:
        dg.TOLERANCES.clear()
        dg.TOLERANCES.update(saved)


def run_verifiers(cfg: rc.RunConfig, names, grid=None) -> list:
    reports = []
    for name in names:
        if name == "interactt":
            reports += [dg.verify_interactt(a, b, m) for a, b, m in dg.DEFAULT_INTERACTT_CASES]
            reports.append(dg.verify_interactt(1.0, 1.0, 0))
            reports.append(dg.verify_interactt(1.0, 2.0, 0))
        elif name == "interpol":
            reports += [dg.verify_interpol(a, b) for a, b in dg.DEFAULT_INTERPOL_CASES]
            reports.append(dg.verify_interpol(0.0, 0.0, tuple(np.geomspace(1.0, 1e4, 13))))
        elif name == "interaction":
            alpha = cfg.multi_soliton().solitons[0].alpha
            seps = np.linspace(10, 35, 11)
            g = grid or dg.scan_grid(seps, alpha, cfg.make_grid().h)
            reports.append(dg.interaction_scan(cfg.k, alpha, seps, g))
        elif name == "growth":
            reports.append(dg.virial_growth(cfg.multi_soliton(), grid or cfg.make_grid(),
                                            dt=cfg.integrator.dt, seed=cfg.seed))
    return reports


def cmd_verify(cfg: rc.RunConfig, col: Collector, threads=1) -> int:
    with tolerance_override(cfg.verify.tolerances):
        reports = run_verifiers(cfg, cfg.verify.verifiers)
    rows = []
    for r in reports:
        col.line(r.line())
        for k, v in r.measured.items():
            rows.append([r.name, k, v])
    col.csv("verifiers.csv", ["verifier", "quantity", "value"], rows)
    col.csv("verdicts.csv", ["verifier", "passed"], [[r.name, r.passed] for r in reports])
    failed = [r.name for r in reports if not r.passed]
    if failed:
        raise VerifierFailure("failed verifiers: " + ", ".join(failed))
    return 0


COMMANDS = {"spectrum": cmd_spectrum, "simulate": cmd_simulate, "shoot": cmd_shoot,
            "verify": cmd_verify}


def build_parser():
    p = argparse.ArgumentParser(prog="nlsmulti", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="YAML run configuration (defaults used when omitted)")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--threads", type=int, default=1, help="FFT workers / concurrent probes")
    p.add_argument("--seed", type=int, help="random seed, unsigned 64-bit (overrides the config)")
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    try:
        cfg = rc.load(args.config) if args.config else rc.RunConfig()
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg = replace(cfg, seed=args.seed)
        if args.out:
            cfg = replace(cfg, out=args.out)
        if args.threads < 1:
            raise ConfigError("--threads must be positive")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    col = Collector(cfg.out)
    status = 0
    try:
        status = COMMANDS[args.command](cfg, col, args.threads)
    except NLSMultiError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        col.line(f"error: {type(exc).__name__}: {exc}")
        status = exc.exit_code
    col.line(f"exit code = {status}")
    col.finish(args.command, cfg, status, argv)
    return status


if __name__ == "__main__":
    sys.exit(main())
