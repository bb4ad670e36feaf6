"""CSTR: open-loop prediction and set-point tracking with a learned lifting.

The input is the coolant temperature measured from its nominal 295 K.
Training takes about a minute on one core.

    python3 demos/cstr_tracking.py
"""

import numpy as np

from liftlearn import dynamics as dyn
from liftlearn.cli import control_runs, load_figure, make_arch, make_dataset, make_plant
from liftlearn.closedloop import rollout_error, run_closed_loop
from liftlearn.training import train

cfg = load_figure("fig11")["cstr"]
plant = make_plant(cfg)
T_ss = dyn.steady_state(plant)[0]
print(f"nominal reactor temperature {T_ss:.4f} K")

data = make_dataset(cfg, plant)
model = train(plant.B, data, make_arch(cfg, plant), cfg.training, plant=plant.name)
print("eigenvalues of learned A:", np.round(np.linalg.eigvals(model.A).real, 3))

rng = np.random.default_rng(0)
for name, lo, hi in (("inside", -15.0, 15.0), ("below", -45.0, -20.0)):
    sig = dyn.StepSignal.from_grid(rng.uniform(lo, hi, (8, 1)), 25, 0.05)
    rep = rollout_error(model, plant, sig, 0.05, 10.0)
    print(f"steps {name} the training range: learned RMSE {rep.model_rmse:.3g} K, "
          f"linearization {rep.baseline_rmse:.3g} K")

for label, run in control_runs(cfg, plant, model):
    res = run_closed_loop(run)
    print(f"{label}: final T = {res.X[-1, 0]:.3f} K (target {T_ss - 10:.3f}), "
          f"final coolant offset {res.U[-1, 0]:.2f} K")
