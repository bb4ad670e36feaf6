"""Learn a one-dimensional lifting of x' = x^2 and check where it is valid.

z = exp(-1/x) satisfies z' = z exactly, so a scalar lifting with A = [1]
exists. The network finds one on [0.5, 5]; outside that range the
derivative fit degrades. Takes about 5 s.

    python3 demos/motivating_fit.py
"""

import numpy as np

from liftlearn import dynamics as dyn
from liftlearn.cli import load_figure, make_arch, make_dataset, make_plant
from liftlearn.closedloop import derivative_fit_report
from liftlearn.liftnet import motivating_exact_lifting
from liftlearn.training import fit_A_least_squares, train

cfg = load_figure("fig6")["motivating"]
plant = make_plant(cfg)
data = make_dataset(cfg, plant)

exact = motivating_exact_lifting()
print("least-squares A for exp(-1/x):", fit_A_least_squares(exact, data)[0, 0])

model = train(plant.B, data, make_arch(cfg, plant), cfg.training, plant=plant.name)
print("learned A:", model.A[0, 0])

for lo, hi in ((0.5, 5.0), (5.0, 10.0), (10.0, 20.0)):
    ds = dyn.generate_uniform_dataset(plant, [[lo, hi]], np.zeros((0, 2)), 400, seed=7)
    rel = derivative_fit_report(model, ds)["relative"][0]
    print(f"x in [{lo:>4}, {hi:>4}]: relative derivative-fit RMSE {rel:.2e}")
