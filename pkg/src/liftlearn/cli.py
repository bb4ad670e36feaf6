"""Command-line pipeline: ``generate``, ``train``, ``validate``, ``control``, ``repro``.

Every command reads one JSON experiment config. Missing keys take the
defaults below; unknown keys are rejected. ``--seed`` and ``--out``
override the config. Exit codes: 0 success, 2 config error, 3 numerical
failure, 4 I/O error.
"""

import argparse
import copy
import json
import logging
import os
import sys
from dataclasses import MISSING, asdict, dataclass, field, fields, is_dataclass, replace

import numpy as np

from . import dynamics as dyn
from .closedloop import (ControlRun, LQRBaselineController, SDREController,
                         bounds_containment, derivative_fit_report, emit_report, exact_oracle,
                         rollout_error, run_closed_loop, write_deriv_fit, write_rollout)
from .errors import ConfigError, DimensionError, DivergenceError, LiftLearnError
from .io import dumps_json, read_dataset, write_csv, write_dataset
from .liftedmodel import (exact_twostate_model, linearize_standard, load_model, save_model)
from .liftnet import NetArchitecture, twostate_exact_A, twostate_exact_lifting
from .riccati import LqrWeights
from .training import LOG_HEADER, TrainConfig, train

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


# ---------------------------------------------------------------------------
# configuration


@dataclass
class PlantBlock:
    name: str = "twostate"
    params: dict = field(default_factory=dict)


@dataclass
class DatasetBlock:
    """``kind`` is ``step`` (random step rollouts) or ``uniform`` (independent
    samples of ``x0_box``). With ``relative`` the boxes are offsets from the
    plant's nominal steady state and input."""

    kind: str = "step"
    x0_box: list = field(default_factory=lambda: [[-6.0, 6.0], [-6.0, 6.0]])
    u_box: list = field(default_factory=lambda: [[-20.0, 20.0]])
    relative: bool = False
    n_traj: int = 20
    steps_per_traj: int = 50
    hold_steps: int = 25
    dt: float = 0.01
    n_samples: int = 400
    seed: int = 0


@dataclass
class ArchBlock:
    n_z: int = 3
    hidden: list = field(default_factory=lambda: [32, 32])
    activation: str = "tanh"
    identity_prefix: bool = True


@dataclass
class RolloutBlock:
    n_signals: int = 0
    n_levels: int = 8
    hold_steps: int = 25
    dt: float = 0.05
    t_end: float = 10.0
    in_u_box: list = None
    out_u_box: list = None
    seed: int = 1000


@dataclass
class ValidationBlock:
    enabled: bool = True
    out_x_box: list = None
    out_n_samples: int = 400
    x_op: list = None
    rollouts: RolloutBlock = field(default_factory=RolloutBlock)


@dataclass
class ControlBlock:
    enabled: bool = True
    q_diag: list = None
    r_diag: list = None
    baseline_q_diag: list = None
    x0: list = field(default_factory=lambda: [5.0, 5.0])
    x_ref: list = field(default_factory=lambda: [0.0, 0.0])
    relative: bool = False
    dt: float = 0.01
    t_end: float = 20.0
    resolve_stride: int = 1
    settle_dims: list = None
    oracle: bool = True


@dataclass
class ExperimentConfig:
    plant: PlantBlock = field(default_factory=PlantBlock)
    dataset: DatasetBlock = field(default_factory=DatasetBlock)
    architecture: ArchBlock = field(default_factory=ArchBlock)
    training: TrainConfig = field(default_factory=TrainConfig)
    validation: ValidationBlock = field(default_factory=ValidationBlock)
    control: ControlBlock = field(default_factory=ControlBlock)
    output: str = "out"

    @classmethod
    def from_dict(cls, d, source="<config>"):
        return _build(cls, d, source, "")

    @classmethod
    def from_file(cls, path):
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise OSError(f"cannot read config {path}: {exc.strerror or exc}") from exc
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
        return cls.from_dict(d, str(path))

    def to_dict(self):
        return asdict(self)


def _build(cls, d, source, prefix):
    if not isinstance(d, dict):
        raise ConfigError(f"{source}: '{prefix or 'config'}' must be a JSON object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(d) - set(known))
    if unknown:
        keys = ", ".join(f"'{prefix}{k}'" for k in unknown)
        raise ConfigError(f"{source}: unknown key {keys}")
    kwargs = {}
    for name, value in d.items():
        f = known[name]
        sub = _default_of(f)
        if is_dataclass(sub):
            kwargs[name] = _build(type(sub), value, source, f"{prefix}{name}.")
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: invalid '{prefix.rstrip('.') or 'config'}' block: {exc}") \
            from exc


def _default_of(f):
    if f.default_factory is not MISSING:
        return f.default_factory()
    return None if f.default is MISSING else f.default


# ---------------------------------------------------------------------------
# pipeline stages


def make_plant(cfg):
    try:
        return dyn.builtin_plant(cfg.plant.name, **cfg.plant.params)
    except (LookupError, TypeError) as exc:
        raise ConfigError(f"plant: {exc}") from exc


def _offset_box(box, centre):
    box = np.asarray(box, dtype=float).reshape(len(centre), 2)
    return (box + np.asarray(centre)[:, None]).tolist()


def dataset_boxes(cfg, plant):
    """Absolute ``(x0_box, u_box)`` of the dataset block."""
    d = cfg.dataset
    x0_box, u_box = d.x0_box, d.u_box
    if d.relative:
        x0_box = _offset_box(x0_box, dyn.steady_state(plant))
        if plant.n_u:
            u_box = _offset_box(u_box, dyn.steady_input(plant))
    if plant.n_u == 0:
        u_box = np.zeros((0, 2))
    return x0_box, u_box


def make_dataset(cfg, plant):
    d = cfg.dataset
    x0_box, u_box = dataset_boxes(cfg, plant)
    if d.kind == "step":
        return dyn.generate_step_dataset(plant, x0_box, u_box, d.n_traj, d.steps_per_traj,
                                         d.hold_steps, d.dt, d.seed)
    if d.kind == "uniform":
        return dyn.generate_uniform_dataset(plant, x0_box, u_box, d.n_samples, d.seed)
    raise ConfigError(f"dataset.kind must be 'step' or 'uniform', got {d.kind!r}")


def make_arch(cfg, plant):
    a = cfg.architecture
    try:
        return NetArchitecture(plant.n_x, a.n_z, tuple(a.hidden), a.activation,
                               a.identity_prefix)
    except ValueError as exc:
        raise ConfigError(f"architecture: {exc}") from exc


def _weights(diag_q, diag_r, n_z, n_u):
    q = np.ones(n_z) if diag_q is None else np.asarray(diag_q, dtype=float)
    r = np.ones(n_u) if diag_r is None else np.asarray(diag_r, dtype=float)
    if q.shape != (n_z,) or r.shape != (n_u,):
        raise ConfigError(f"control weights need {n_z} Q and {n_u} R entries, "
                          f"got {q.size} and {r.size}")
    return LqrWeights.diag(q, r)


def cmd_generate(cfg, out):
    plant = make_plant(cfg)
    ds = make_dataset(cfg, plant)
    os.makedirs(out, exist_ok=True)
    paths = write_dataset(ds, os.path.join(out, "dataset.csv"))
    log.info("wrote %d samples to %s", len(ds), paths[0])
    return list(paths)


def _load_dataset(path, plant):
    ds = read_dataset(path)
    if ds.n_x != plant.n_x or ds.n_u != plant.n_u:
        raise DimensionError(f"{path}: dataset has n_x={ds.n_x}, n_u={ds.n_u} but plant "
                             f"{plant.name!r} has n_x={plant.n_x}, n_u={plant.n_u}")
    return ds


def cmd_train(cfg, out, dataset_path=None):
    plant = make_plant(cfg)
    ds = _load_dataset(dataset_path or os.path.join(out, "dataset.csv"), plant)
    rows = []
    model = train(plant.B, ds, make_arch(cfg, plant), cfg.training, plant=plant.name,
                  log_rows=rows)
    os.makedirs(out, exist_ok=True)
    model_path = os.path.join(out, "model.json")
    save_model(model, model_path)
    log_path = os.path.join(out, "train_log.csv")
    write_csv(log_path, LOG_HEADER, rows)
    return [model_path, log_path]


def _deriv_series(path, model, ds, fit):
    n_x, n_z = ds.n_x, fit["lhs"].shape[1]
    header = (["t", "traj_id"] + [f"x_{i}" for i in range(n_x)]
              + [f"lhs_{i}" for i in range(n_z)] + [f"rhs_{i}" for i in range(n_z)])
    rows = ([t, int(j), *x, *a, *b] for t, j, x, a, b in
            zip(ds.times, ds.traj_id, ds.X, fit["lhs"], fit["rhs"]))
    write_csv(path, header, rows)


def _baseline_series(path, plant, baseline, datasets):
    n_x = plant.n_x
    header = ([f"x_{i}" for i in range(n_x)] + [f"dx_true_{i}" for i in range(n_x)]
              + [f"dx_lin_{i}" for i in range(n_x)] + ["in_range"])
    rows = []
    for flag, ds in datasets:
        for x, xd, u in zip(ds.X, ds.Xdot, ds.U):
            rows.append([*x, *xd, *baseline.rhs(x, u), flag])
    write_csv(path, header, rows)


def _step_signals(r, n_u, box, seed):
    rng = np.random.default_rng(seed)
    box = np.asarray(box, dtype=float).reshape(n_u, 2)
    for _ in range(r.n_signals):
        levels = rng.uniform(box[:, 0], box[:, 1], size=(r.n_levels, n_u))
        yield dyn.StepSignal.from_grid(levels, r.hold_steps, r.dt)


def cmd_validate(cfg, out, model_path=None, dataset_path=None, oracle=None):
    plant = make_plant(cfg)
    ds = _load_dataset(dataset_path or os.path.join(out, "dataset.csv"), plant)
    if oracle == "twostate":
        if plant.name != "twostate":
            raise ConfigError("--oracle twostate needs the twostate plant")
        model = exact_twostate_model(plant.params["mu"], plant.params["lambda_sys"],
                                     ds.state_bounds)
    elif oracle:
        raise ConfigError(f"unknown oracle {oracle!r}; available: twostate")
    else:
        model = load_model(model_path or os.path.join(out, "model.json"))
    if model.n_x != plant.n_x or model.n_u != plant.n_u:
        raise DimensionError(f"model dimensions (n_x={model.n_x}, n_u={model.n_u}) do not "
                             f"match plant {plant.name!r}")
    v = cfg.validation
    os.makedirs(out, exist_ok=True)
    written = []
    summary = {"plant": plant.name, "oracle": oracle}

    fit = derivative_fit_report(model, ds)
    written.append(write_deriv_fit(fit, os.path.join(out, "deriv_fit.csv")))
    _deriv_series(os.path.join(out, "deriv_series.csv"), model, ds, fit)
    written.append(os.path.join(out, "deriv_series.csv"))
    summary["deriv_fit_relative"] = fit["relative"].tolist()

    sets = [(1, ds)]
    if v.out_x_box is not None:
        ds_out = dyn.generate_uniform_dataset(plant, v.out_x_box, dataset_boxes(cfg, plant)[1],
                                              v.out_n_samples, cfg.dataset.seed + 1)
        fit_out = derivative_fit_report(model, ds_out)
        written.append(write_deriv_fit(fit_out, os.path.join(out, "deriv_fit_out.csv")))
        _deriv_series(os.path.join(out, "deriv_series_out.csv"), model, ds_out, fit_out)
        written.append(os.path.join(out, "deriv_series_out.csv"))
        summary["deriv_fit_out_relative"] = fit_out["relative"].tolist()
        summary["deriv_fit_degradation"] = (fit_out["relative"] / fit["relative"]).tolist()
        sets.append((0, ds_out))

    x_op = dyn.steady_state(plant) if v.x_op is None else np.asarray(v.x_op, dtype=float)
    baseline = linearize_standard(plant, x_op, dyn.steady_input(plant))
    _baseline_series(os.path.join(out, "baseline_series.csv"), plant, baseline, sets)
    written.append(os.path.join(out, "baseline_series.csv"))

    r = v.rollouts
    if r.n_signals and plant.n_u:
        # rollout boxes are offsets from the nominal input
        centre = dyn.steady_input(plant)
        in_box = r.in_u_box
        if in_box is None:
            in_box = (np.asarray(dataset_boxes(cfg, plant)[1]) - centre[:, None]).tolist()
        for tag, box, seed in (("in", in_box, r.seed), ("out", r.out_u_box, r.seed + 1)):
            if box is None:
                continue
            stats = []
            signals = _step_signals(r, plant.n_u, _offset_box(box, centre), seed)
            for k, sig in enumerate(signals):
                rep = rollout_error(model, plant, sig, r.dt, r.t_end)
                written.append(write_rollout(rep, os.path.join(out, f"rollout_{tag}_{k}.csv")))
                stats.append((rep.model_rmse, rep.baseline_rmse, rep.n_out_of_bounds))
            model_rmse, base_rmse, n_oob = (list(c) for c in zip(*stats))
            summary[f"rollout_{tag}"] = {"model_rmse": model_rmse, "baseline_rmse": base_rmse,
                                         "n_out_of_bounds": n_oob}
        if "rollout_out" in summary:
            summary["rollout_degradation"] = float(
                np.mean(summary["rollout_out"]["model_rmse"])
                / np.mean(summary["rollout_in"]["model_rmse"]))
    path = os.path.join(out, "validate_summary.json")
    with open(path, "w") as fh:
        fh.write(dumps_json(summary))
    written.append(path)
    return written


def control_runs(cfg, plant, model):
    """The (label, ControlRun) pairs of the control block."""
    c = cfg.control
    x0, x_ref = np.asarray(c.x0, dtype=float), np.asarray(c.x_ref, dtype=float)
    if c.relative:
        x0, x_ref = x0 + dyn.steady_state(plant), x_ref + dyn.steady_state(plant)
    w = _weights(c.q_diag, c.r_diag, model.n_z, plant.n_u)
    qb = c.baseline_q_diag
    if qb is None:
        qb = np.diag(w.Q)[:plant.n_x] if model.lifting.identity_prefix else None
    wb = _weights(qb, np.diag(w.R), plant.n_x, plant.n_u)
    ctrls = [("learned", SDREController(model, w, name="learned"))]
    baseline = linearize_standard(plant, dyn.steady_state(plant), dyn.steady_input(plant))
    ctrls.append(("baseline", LQRBaselineController(baseline, wb, name="baseline")))
    if c.oracle and plant.name == "twostate":
        mu, lam = plant.params["mu"], plant.params["lambda_sys"]
        ctrls.append(("oracle", exact_oracle(twostate_exact_lifting(), twostate_exact_A(mu, lam),
                                             plant.B, w, model.state_bounds)))
    dims = None if c.settle_dims is None else tuple(c.settle_dims)
    return [(label, ControlRun(plant, ctrl, x0, x_ref, c.dt, c.t_end, c.resolve_stride, dims))
            for label, ctrl in ctrls]


def cmd_control(cfg, out, model_path=None):
    plant = make_plant(cfg)
    model_path = model_path or os.path.join(out, "model.json")
    try:
        model = load_model(model_path)
    except FileNotFoundError as exc:
        raise FileNotFoundError(f"model file not found: {model_path}") from exc
    if plant.n_u == 0:
        raise ConfigError(f"plant {plant.name!r} has no inputs to control")
    os.makedirs(out, exist_ok=True)
    written, summary = [], {}
    for label, run in control_runs(cfg, plant, model):
        try:
            res = run_closed_loop(run)
        except DivergenceError as exc:
            # keep what was simulated; the summary records the divergence
            res = exc.partial
        written.extend(emit_report(res, out, f"control_{label}"))
        frac, first_exit = bounds_containment(res.X, model.state_bounds, res.times)
        summary[label] = {
            "settle_time": res.settle_time, "terminal_error": res.terminal_error,
            "terminal_state": res.X[-1].tolist(), "containment": frac,
            "first_exit": first_exit, "failure": res.failure,
        }
    path = os.path.join(out, "control_summary.json")
    with open(path, "w") as fh:
        fh.write(dumps_json(_jsonable(summary)))
    written.append(path)
    return written


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, float) and not np.isfinite(obj):
        return "inf" if obj > 0 else "-inf"
    return obj


# ---------------------------------------------------------------------------
# figure registry


def _twostate(narrow=False, control=True, validation=True):
    d = {
        "plant": {"name": "twostate"},
        "dataset": {"kind": "step", "x0_box": [[-6.0, 6.0], [-6.0, 6.0]],
                    "u_box": [[-20.0, 20.0]], "n_traj": 20, "steps_per_traj": 50,
                    "hold_steps": 25, "dt": 0.01, "seed": 0},
        "architecture": {"n_z": 3, "hidden": [32, 32], "activation": "tanh",
                         "identity_prefix": True},
        "training": {"max_inner_iters": 300, "seed": 0},
        "validation": {"enabled": validation},
        "control": {"enabled": control, "q_diag": [1.0, 10.0, 0.0], "r_diag": [0.1],
                    "x0": [5.0, 5.0], "x_ref": [0.0, 0.0], "dt": 0.01, "t_end": 20.0,
                    "settle_dims": [1]},
    }
    if narrow:
        d["dataset"].update({"x0_box": [[0.0, 5.0], [0.0, 5.0]], "u_box": [[-2.0, 2.0]],
                             "n_traj": 5})
    return d


def _cstr(control=True, out_range=False):
    return {
        "plant": {"name": "cstr"},
        "dataset": {"kind": "step", "x0_box": [[-15.0, 15.0]], "u_box": [[-15.0, 15.0]],
                    "relative": True, "n_traj": 10, "steps_per_traj": 100, "hold_steps": 25,
                    "dt": 0.05, "seed": 0},
        "architecture": {"n_z": 3, "hidden": [32, 32], "activation": "tanh",
                         "identity_prefix": True},
        "training": {"max_inner_iters": 2000, "seed": 0},
        "validation": {"rollouts": {
            "n_signals": 5, "n_levels": 8, "hold_steps": 25, "dt": 0.05, "t_end": 10.0,
            "in_u_box": [[-15.0, 15.0]],
            "out_u_box": [[-45.0, -20.0]] if out_range else None, "seed": 1000}},
        "control": {"enabled": control, "q_diag": [1.0, 0.0, 0.0], "r_diag": [1.0],
                    "x0": [0.0], "x_ref": [-10.0], "relative": True, "dt": 0.05,
                    "t_end": 10.0},
    }


def _motivating():
    return {
        "plant": {"name": "motivating"},
        "dataset": {"kind": "uniform", "x0_box": [[0.5, 5.0]], "u_box": [],
                    "n_samples": 400, "seed": 0},
        "architecture": {"n_z": 1, "hidden": [16, 16], "activation": "tanh",
                         "identity_prefix": False},
        "training": {"max_inner_iters": 500, "seed": 1},
        "validation": {"out_x_box": [[5.0, 10.0]], "out_n_samples": 400, "x_op": [1.0]},
        "control": {"enabled": False},
    }


FIGURES = {
    "fig2": ("Twostate plant, broad data: chain-rule derivative against the linear model "
             "(deriv_series.csv, deriv_fit.csv).", {"broad": _twostate(control=False)}),
    "fig3": ("Twostate regulation from (5, 5): learned SDRE, linearization LQR and exact "
             "oracle (control_*.csv).", {"broad": _twostate()}),
    "fig4": ("CSTR open-loop rollouts for step inputs inside the training range "
             "(rollout_in_*.csv).", {"cstr": _cstr(control=False)}),
    "fig5": ("CSTR open-loop rollouts for step inputs below the training range "
             "(rollout_out_*.csv).", {"cstr": _cstr(control=False, out_range=True)}),
    "fig6": ("Motivating plant: derivative fit inside and outside the training range "
             "plus the tangent-line baseline (deriv_series*.csv, baseline_series.csv).",
             {"motivating": _motivating()}),
    "fig7": ("Broad-data closed-loop trajectory against its training box "
             "(control_learned.csv in_bounds column, bounds in its meta file).",
             {"broad": _twostate()}),
    "fig8": ("Twostate regulation with the model trained on narrow data "
             "(control_*.csv).", {"narrow": _twostate(narrow=True)}),
    "fig9": ("Narrow-data closed-loop trajectory against its training box "
             "(control_learned.csv in_bounds column).", {"narrow": _twostate(narrow=True)}),
    "fig10": ("Broad and narrow trajectories with both training boxes.",
              {"broad": _twostate(), "narrow": _twostate(narrow=True)}),
    "fig11": ("CSTR set-point tracking to T_ss - 10 K (control_*.csv).",
              {"cstr": _cstr()}),
}


def figure_document(fig_id):
    desc, runs = FIGURES[fig_id]
    return {"figure": fig_id, "description": desc, "runs": copy.deepcopy(runs)}


def load_figure(fig_id, path=None):
    """Figure runs as ``{label: ExperimentConfig}`` from a file or the registry."""
    if path is not None:
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") \
                    from exc
    elif fig_id in FIGURES:
        doc = figure_document(fig_id)
    else:
        raise ConfigError(f"unknown figure {fig_id!r}; available: {', '.join(FIGURES)}")
    unknown = sorted(set(doc) - {"figure", "description", "runs"})
    if unknown:
        raise ConfigError(f"{path or fig_id}: unknown key(s) {unknown}")
    return {label: ExperimentConfig.from_dict(run, f"{path or fig_id}:runs.{label}")
            for label, run in doc["runs"].items()}


def cmd_repro(fig_id, out, seed=None, path=None):
    written = []
    for label, cfg in load_figure(fig_id, path).items():
        cfg = _override(cfg, seed, None)
        run_out = os.path.join(out, fig_id, label)
        written += cmd_generate(cfg, run_out)
        written += cmd_train(cfg, run_out)
        if cfg.validation.enabled:
            written += cmd_validate(cfg, run_out)
        if cfg.control.enabled:
            written += cmd_control(cfg, run_out)
    return written


# ---------------------------------------------------------------------------
# entry point


def _override(cfg, seed, out):
    if seed is not None:
        cfg = replace(cfg, dataset=replace(cfg.dataset, seed=seed),
                      training=replace(cfg.training, seed=seed))
    if out is not None:
        cfg = replace(cfg, output=out)
    return cfg


def build_parser():
    p = argparse.ArgumentParser(prog="liftlearn", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="experiment config (JSON); defaults if omitted")
        sp.add_argument("--seed", type=int, help="override dataset and training seeds")
        sp.add_argument("--out", help="output directory (overrides the config)")

    common(sub.add_parser("generate", help="simulate a training dataset"))
    sp = sub.add_parser("train", help="train a lifted model on a dataset")
    common(sp)
    sp.add_argument("--dataset", help="dataset CSV (default: <out>/dataset.csv)")
    sp = sub.add_parser("validate", help="derivative-fit and rollout reports")
    common(sp)
    sp.add_argument("--model", help="model JSON (default: <out>/model.json)")
    sp.add_argument("--dataset", help="dataset CSV (default: <out>/dataset.csv)")
    sp.add_argument("--oracle", help="validate a closed-form model instead (twostate)")
    sp = sub.add_parser("control", help="closed-loop runs on the true plant")
    common(sp)
    sp.add_argument("--model", help="model JSON (default: <out>/model.json)")
    sp = sub.add_parser("repro", help="regenerate the data behind one figure")
    sp.add_argument("figure_id", help=f"one of: {', '.join(FIGURES)}")
    sp.add_argument("--config", help="figure file (default: the built-in definition)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", default="repro", help="output root (default: repro)")
    return p


def run(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "repro":
        return cmd_repro(args.figure_id, args.out, args.seed, args.config)
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    cfg = _override(cfg, args.seed, args.out)
    out = cfg.output
    if args.command == "generate":
        return cmd_generate(cfg, out)
    if args.command == "train":
        return cmd_train(cfg, out, args.dataset)
    if args.command == "validate":
        return cmd_validate(cfg, out, args.model, args.dataset, args.oracle)
    return cmd_control(cfg, out, args.model)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    logging.basicConfig(level=logging.INFO if "-v" in argv or "--verbose" in argv
                        else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        for path in run(argv):
            print(path)
    except (ConfigError, DimensionError, LookupError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LiftLearnError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError) as exc:
        kind = EXIT_IO if isinstance(exc, OSError) else EXIT_NUMERIC
        print(f"error: {exc}", file=sys.stderr)
        return kind
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
