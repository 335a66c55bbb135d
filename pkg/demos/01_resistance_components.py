# %% [markdown]
# # Added resistance components
#
# Wind and wave resistance for a 190 m bulk carrier. The script prints
# a few reference values and writes two charts into `demos/out/`.

# %%
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from shipperf.core import KNOT, EnvironmentState
from shipperf.data import default_vessel
from shipperf.waves import default_registry, polar_sweep, pm_spectrum
from shipperf.wind import WindSetup

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)
vessel = default_vessel()

# %% [markdown]
# ## Wind
# The coefficient curve comes from main particulars alone. Laden and ballast
# conditions differ only in the transverse projected area. The blend around
# beam wind removes the jump between the head and stern regressions.

# %%
angles = np.radians(np.arange(0, 181, 2))
fig, ax = plt.subplots(figsize=(6, 3.5))
for form in ("printed", "iso15016"):
    setup = WindSetup.build(vessel, 9.0, form=form)
    ax.plot(np.degrees(angles), [setup.laden(a) for a in angles], label=form)
ax.axhline(0, color="grey", lw=0.5)
ax.set_xlabel("relative wind angle (deg)")
ax.set_ylabel("C_AA")
ax.legend()
fig.tight_layout()
fig.savefig(OUT / "wind_coefficient.png", dpi=120)

setup = WindSetup.build(vessel, 9.0)
for draft in (11.0, 7.5):
    r = setup.resistance(EnvironmentState(wind_speed_rel=15.0), 13 * KNOT, draft)
    print(f"15 m/s head wind at 13 kn, draft {draft} m: R_AA = {r / 1e3:.1f} kN")

# %% [markdown]
# ## Waves
# The closed-form theories need only H_S and the heading. The spectral ones
# integrate a response function over a Pierson-Moskowitz spectrum and are
# valid within 45 deg of the bow.

# %%
spec = pm_spectrum(3.0, 9.0)
print(f"m0 = {spec.m0():.6f} m^2 (H_S^2/16 = {9 / 16:.6f})")

reg = default_registry()
env = EnvironmentState(sig_wave_height=3.0, wave_peak_period=9.0)
rows = polar_sweep(reg.values(), vessel.with_draft(10.0), env, 13 * KNOT, step_deg=5)
fig, ax = plt.subplots(figsize=(6, 3.5))
for name in reg:
    pts = [(a, r) for a, n, r in rows if n == name and a <= 180]
    ax.plot([a for a, _ in pts], [r / 1e3 for _, r in pts], label=name)
ax.set_xlabel("relative wave direction (deg, 0 = head)")
ax.set_ylabel("R_AW (kN)")
ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig(OUT / "wave_polar.png", dpi=120)
head = {n: r for a, n, r in rows if a == 0}
for name, r in head.items():
    print(f"head seas H_S=3 m: {name:22s} {r / 1e3:8.1f} kN")
