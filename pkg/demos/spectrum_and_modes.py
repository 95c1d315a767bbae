# %% [markdown]
# Linearized operator around the k = 3 ground state: the unstable pair
# +-i lambda0, the four root-space vectors, and how lambda0 scales with alpha.

# %%
import numpy as np

from nlsmulti.grid import make_grid
from nlsmulti.linop import (assemble_H, discrete_spectrum, essential_spectrum_report,
                            growth_rate_from_evolution, kernel_identities)

K = 3.0
g = make_grid(40.0, 2048)
op = assemble_H(1.0, K, g)
sd = discrete_spectrum(op)
print(f"lambda0 = {sd.lambda0:.10f}   eigen residual = {sd.eigen_residual:.1e}")

# %% [markdown]
# H applied to the four generators of the symmetry group vanishes; the
# generalized kernel vectors satisfy H^2 v = 0.

# %%
for name, r in kernel_identities(op).items():
    print(f"H v_{name:<12s} {r:.2e}")
for name, r in zip(("translation", "phase", "galilean", "scaling"), sd.root.h2_residuals):
    print(f"H^2 {name:<14s} {r:.2e}")

# %% [markdown]
# Where the unstable eigenfunction lives: Z_plus is localized on the soliton
# scale 1/alpha, its two components are complex conjugates up to sign.

# %%
z1 = sd.z_plus[0]
w = np.abs(z1) ** 2
print("center of |Z_plus|^2:", g.h * np.sum(g.x * w) / (g.h * np.sum(w)))
print("rms width          :", np.sqrt(g.h * np.sum(g.x ** 2 * w) / (g.h * np.sum(w))))
print("|z2 - conj(z1)|    :", np.max(np.abs(sd.z_plus[1] - np.conj(z1))))

# %% [markdown]
# The same rate from time stepping the linear flow, and the alpha^2 law.

# %%
grown = growth_rate_from_evolution(op, t_max=4.0, spectral=sd, observable="norm")
print(f"growth-rate fit {grown['rate']:.5f} vs eigensolver {sd.lambda0:.5f}")

fine = make_grid(40.0, 4096)
alphas = np.array([1.0, 1.25, 1.5, 1.75, 2.0])
lams = np.array([discrete_spectrum(assemble_H(a, K, fine)).lambda0 for a in alphas])
for a, lam in zip(alphas, lams):
    print(f"alpha {a:4.2f}  lambda0 {lam:12.8f}  lambda0/alpha^2 {lam / a ** 2:.10f}")
print("fitted power:", np.polyfit(np.log(alphas), np.log(lams), 1)[0])

# %% [markdown]
# Essential spectrum: the rest of the dense spectrum sits on the real axis
# with |Re| >= alpha^2.

# %%
rep = essential_spectrum_report(op)
for key, val in rep.items():
    print(key, val)
