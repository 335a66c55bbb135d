# %% [markdown]
# # Calm-water speed-power fit
#
# Generate a synthetic voyage with a known calm-water curve, remove the
# weather contributions from the calm-weather subset, find the speed
# breakpoint and fit the log-linear model. Then compare with the truth.

# %%
import numpy as np

from shipperf.calmwater import predict
from shipperf.core import KNOT
from shipperf.data import SyntheticScenario, derive_seed, filter_steady_state, generate
from shipperf.evaluation import fit_calm_from_records
from shipperf.waves import get_theory

scenario = SyntheticScenario(n_records=8000, seed=derive_seed(0, "generate"))
records, dropped = filter_steady_state(generate(scenario))
print(f"{len(records)} steady-state records; dropped {dropped}")

# %% [markdown]
# Only records with H_S <= 1 m enter the fit. Their wind and wave power is
# subtracted with the same theories the scenario used.

# %%
fit = fit_calm_from_records(
    records, scenario.vessel, scenario.wind_setup(), get_theory(scenario.wave_theory)
)
truth = scenario.calm_model
print(f"calm-weather records used: {fit.n_calm}")
print(f"breakpoint: fitted {fit.model.breakpoints[0].speed / KNOT:.2f} kn, "
      f"true {truth.breakpoints[0].speed / KNOT:.2f} kn")
print("exponents below/above the breakpoint:",
      " / ".join(f"{e:.3f}" for e in fit.diagnostics.effective_exponents))

# %%
speeds = np.linspace(10, 15, 6) * KNOT
for draft in (7.5, 11.0):
    err = predict(fit.model, speeds, draft) / predict(truth, speeds, draft) - 1
    print(f"draft {draft} m: max relative error of the fitted curve {100 * np.max(np.abs(err)):.2f} %")
