# %% [markdown]
# # Benchmark of wave theories against a small network
#
# The calm-water model is fitted once. Each wave theory is then added on top
# and scored against measured power. A feedforward network trained on the
# raw features is scored by k-fold cross-validation on the same data.

# %%
from shipperf import mlmodel
from shipperf.data import SyntheticScenario, derive_seed, filter_steady_state, generate
from shipperf.evaluation import benchmark, fit_calm_from_records, kfold_evaluate
from shipperf.waves import default_registry

scenario = SyntheticScenario(n_records=6000, seed=derive_seed(1, "generate"))
records, _ = filter_steady_state(generate(scenario))
reg = default_registry()
wind = scenario.wind_setup()
calm = fit_calm_from_records(records, scenario.vessel, wind, reg[scenario.wave_theory]).model

# %%
res = benchmark(records, scenario.vessel, list(reg.values()), {"fitted": calm}, wind)
for col in res.columns:
    cell = res.cell("fitted", col)
    print(f"{col:24s} MAPE {100 * cell.mape:6.2f} %   out of validity: {cell.n_out_of_validity}")

# %% [markdown]
# Records outside a theory's validity sector get no wave correction, which
# is why the 45 deg theories score close to the uncorrected baseline.

# %%
cfg = mlmodel.TrainConfig(seed=derive_seed(1, "train-nn"))


def trainer(train):
    model, _ = mlmodel.train(train, cfg)
    return lambda recs: mlmodel.predict(model, recs)


kf = kfold_evaluate(records, 5, trainer, seed=derive_seed(1, "kfold"))
print("network k-fold MAPE per fold:", ", ".join(f"{100 * f.mape:.2f} %" for f in kf.folds))
print(f"network k-fold mean MAPE {100 * kf.mean.mape:.2f} %")
