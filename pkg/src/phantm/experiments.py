"""Config-driven, seeded Monte-Carlo experiment runner and output writers.

One INI-style config file describes one experiment.  Outputs are diffable
CSV tables (RFC-4180, CRLF) plus a JSON manifest carrying the config hash,
seed, version, and the per-trial rng derivation scheme.  Re-running a config
with the same seed is byte-identical; trials are parallelizable and results
are aggregated in trial order.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import __version__
from .fock import DensityOperator, FockVector
from .gaussian import db_to_r
from .states import cat, parity_expectation, squeezed_vacuum
from .protocol import (
    LossSpec,
    PhantmStepConfig,
    phantm_step,
    run_chain,
    _plain_config,
)
from .analysis import fit, wigner, wln
from .measurement import sample_homodyne

EXPERIMENTS = (
    "generate",
    "preserve",
    "ideal_ladder",
    "loss_sweep",
    "disp_error",
    "macronode_weighting",
    "breed_qunaught",
)

RNG_SCHEME = "numpy SeedSequence(entropy=seed, spawn_key=(trial,)) -> default_rng"


class ConfigError(ValueError):
    """Invalid or unparsable experiment configuration."""


@dataclass
class ExperimentConfig:
    experiment: str
    cutoff: int = 60
    squeezing_db: tuple = (15.0,)
    steps: int = 20
    trials: int = 20
    seed: int = 0
    out: str = "runs/out"
    workers: int = 1
    post_select_m: float | None = None
    post_select_n: int | None = None
    loss_eta: tuple = ()
    loss_locations: tuple = ("A", "B", "C")
    loss_truncation: int = 8
    options: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.cutoff < 8:
            raise ConfigError("cutoff too small")
        if self.seed is None:
            raise ConfigError("a seed is required (no wall-clock seeding)")


def _parse_floats(text: str) -> tuple:
    return tuple(float(x) for x in text.replace(",", " ").split())


def parse_config(path: str, overrides: dict | None = None) -> ExperimentConfig:
    """Read an experiment config file (INI sections [run], [post_select],
    [loss], [options]); parse errors carry line numbers via configparser."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            parser.read_file(fh, source=path)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    if not parser.has_section("run"):
        raise ConfigError(f"{path}: missing required [run] section")
    run = parser["run"]
    try:
        cfg = ExperimentConfig(
            experiment=run.get("experiment", ""),
            cutoff=run.getint("cutoff", 60),
            squeezing_db=_parse_floats(run.get("squeezing_db", "15.0")),
            steps=run.getint("steps", 20),
            trials=run.getint("trials", 20),
            seed=run.getint("seed", 0),
            out=run.get("out", "runs/out"),
            workers=run.getint("workers", 1),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: invalid value in [run]: {exc}") from exc
    if parser.has_section("post_select"):
        sec = parser["post_select"]
        if "m" in sec:
            cfg.post_select_m = sec.getfloat("m")
        if "n" in sec:
            cfg.post_select_n = sec.getint("n")
    if parser.has_section("loss"):
        sec = parser["loss"]
        cfg.loss_eta = _parse_floats(sec.get("eta", "1.0"))
        cfg.loss_locations = tuple(
            s.strip().upper() for s in sec.get("locations", "A,B,C").split(",") if s.strip()
        )
        cfg.loss_truncation = sec.getint("kraus_truncation", 8)
    if parser.has_section("options"):
        cfg.options = dict(parser["options"])
    for key, value in (overrides or {}).items():
        setattr(cfg, key, value)
    cfg.validate()
    return cfg


def config_text_hash(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def trial_rng(seed: int, trial: int):
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(trial,)))


# ---------------------------------------------------------------------------
# writers


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) and x == int(x) and abs(x) < 1e15:
        return f"{x:.1f}"
    if isinstance(x, (float, np.floating)):
        return f"{x:.12g}"
    return str(x)


def write_csv(path: str, header: list, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def write_wigner_csv(path: str, grid) -> None:
    """Axis header rows then the W matrix: first row q axis, second p axis."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["q_axis"] + [_fmt(x) for x in grid.q_axis])
        writer.writerow(["p_axis"] + [_fmt(x) for x in grid.p_axis])
        for i, row in enumerate(grid.values):
            writer.writerow([f"W[q={_fmt(grid.q_axis[i])}]"] + [_fmt(x) for x in row])


def write_state_csv(path: str, state: FockVector) -> None:
    rows = [(n, float(a.real), float(a.imag)) for n, a in enumerate(state.amplitudes)]
    write_csv(path, ["n", "re", "im"], rows)


def read_state_csv(path: str) -> FockVector:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:3] != ["n", "re", "im"]:
            raise ConfigError(f"{path}: not a state file (header {header})")
        amps = [complex(float(r[1]), float(r[2])) for r in reader]
    return FockVector(np.asarray(amps), 1, len(amps))


# ---------------------------------------------------------------------------
# per-experiment trial functions (top-level for pickling)


def _chain_trial(args):
    (kind, trial, seed, db, steps, cutoff, options, ps_m, ps_n) = args
    rng = trial_rng(seed, trial)
    r = db_to_r(db)
    m_model = options.get("m_model", "realigned")
    cfg = PhantmStepConfig(
        r_cluster=r,
        engine="kraus",
        m_model=m_model,
        forced_m=ps_m,
        forced_n=ps_n,
    )
    rows = []
    if kind == "generate":
        state = squeezed_vacuum(r, cutoff)
        chain = run_chain(state, steps, cfg, rng)
        for k, snap in enumerate(chain.snapshots):
            res = fit(snap, "cat", multistart=6)
            sub = chain.record.entries[2 * k]
            rows.append(
                (
                    trial,
                    k + 1,
                    sub.n,
                    sub.m,
                    res["alpha"],
                    res["phi"],
                    res["r"],
                    res.fidelity,
                )
            )
        return trial, rows
    if kind == "preserve":
        cadence = options.get("cadence", "phantm")
        if cadence == "plain":
            cfg = PhantmStepConfig(r_cluster=r, engine="kraus", m_model="circuit")
        alpha0 = float(options.get("cat_alpha", 2.0))
        state = cat(alpha0, 0.0, 0.0, cutoff)
        plain_cfg = _plain_config(cfg)
        res = fit(state, "cat", multistart=6)
        rows.append((trial, 0, None, None, res["alpha"], res["phi"], res["r"], res.fidelity))
        for k in range(steps):
            use_sub = cadence == "phantm" and k % 2 == 0
            state, rec = phantm_step(state, cfg if use_sub else plain_cfg, rng, k)
            res = fit(state, "cat", multistart=6)
            rows.append((trial, k + 1, rec.n, rec.m, res["alpha"], res["phi"], res["r"], res.fidelity))
        return trial, rows
    raise ValueError(kind)


def _qunaught_trial(args):
    (trial, seed, db, cutoff, options, ps_m) = args
    from .breeding import qunaught_pipeline

    rng = trial_rng(seed, trial)
    alpha = float(options.get("cat_alpha", 1.6))
    cat_r = float(options.get("cat_r", -0.1))
    _, res = qunaught_pipeline(
        alpha, cat_r, db_to_r(db), cutoff, rng, post_select_m=ps_m if ps_m is not None else 0.0
    )
    return trial, [
        (
            trial,
            alpha,
            cat_r,
            res["delta"],
            res["spacing"],
            res["s_gkp_db"],
            res.fidelity,
            int(res.converged),
        )
    ]


# ---------------------------------------------------------------------------
# experiment drivers


def _fan_out(cfg: ExperimentConfig, worker, arglist):
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(worker, arglist))
    else:
        results = [worker(a) for a in arglist]
    results.sort(key=lambda pair: pair[0])
    rows = []
    for _, trial_rows in results:
        rows.extend(trial_rows)
    return rows


def _summarize_by_step(rows):
    by_step = {}
    for row in rows:
        by_step.setdefault(row[1], []).append(row)
    out = []
    for step in sorted(by_step):
        alphas = np.array([r[4] for r in by_step[step]], dtype=float)
        fids = np.array([r[7] for r in by_step[step]], dtype=float)
        out.append(
            (
                step,
                alphas.mean(),
                alphas.std(),
                fids.mean(),
                fids.std(),
                len(by_step[step]),
            )
        )
    return out


def run_experiment(cfg: ExperimentConfig, config_path: str | None = None) -> str:
    """Execute the configured experiment and write the artifact bundle.

    Returns the bundle directory.  Bundle members: trajectory.csv (per-trial
    tables), summary.csv (per-step mean/std), optional Wigner grids, and
    manifest.json with config hash, seed, version, and acceptance checks.
    """
    cfg.validate()
    out = cfg.out
    os.makedirs(out, exist_ok=True)
    checks: list[dict] = []
    kind = cfg.experiment

    if kind in ("generate", "preserve"):
        db = cfg.squeezing_db[0]
        args = [
            (kind, t, cfg.seed, db, cfg.steps, cfg.cutoff, cfg.options, cfg.post_select_m, cfg.post_select_n)
            for t in range(cfg.trials)
        ]
        rows = _fan_out(cfg, _chain_trial, args)
        write_csv(
            os.path.join(out, "trajectory.csv"),
            ["trial", "step", "n_subtracted", "m_value", "alpha", "phi", "r", "fidelity"],
            rows,
        )
        summary = _summarize_by_step(rows)
        write_csv(
            os.path.join(out, "summary.csv"),
            ["step", "mean_alpha", "std_alpha", "mean_fidelity", "std_fidelity", "trials"],
            summary,
        )
        final = summary[-1]
        if kind == "generate":
            checks.append(
                {
                    "name": "mean cat fidelity at final step >= 0.95",
                    "value": final[3],
                    "passed": bool(final[3] >= 0.95),
                }
            )
            checks.append(
                {
                    "name": "mean fitted |alpha| in [0.9, 1.8] at final step",
                    "value": final[1],
                    "passed": bool(0.9 <= final[1] <= 1.8),
                }
            )
        else:
            cadence = cfg.options.get("cadence", "phantm")
            alpha0 = float(cfg.options.get("cat_alpha", 2.0))
            if cadence == "plain":
                checks.append(
                    {
                        "name": "plain-teleportation mean |alpha| decays by > 30%",
                        "value": final[1] / alpha0,
                        "passed": bool(final[1] <= 0.7 * alpha0),
                    }
                )
            else:
                checks.append(
                    {
                        "name": "PhANTM cadence keeps mean |alpha| >= 1.2",
                        "value": final[1],
                        "passed": bool(final[1] >= 1.2),
                    }
                )

    elif kind == "ideal_ladder":
        rows = []
        for total_photons in range(1, cfg.steps + 1):
            step_cfg = PhantmStepConfig(
                r_cluster=3.0, bs_theta=0.02, engine="ideal", forced_n=1, forced_m=0.0
            )
            chain = run_chain(squeezed_vacuum(0.7, cfg.cutoff), total_photons, step_cfg, None)
            res = fit(chain.final, "cat", multistart=8)
            par = parity_expectation(chain.final)
            rows.append((total_photons, res["alpha"], res["phi"], res["r"], res.fidelity, par))
            if cfg.options.get("wigner", "true").lower() in ("1", "true", "yes"):
                grid = wigner(chain.final, q_range=9.0)  # idealized cats are anti-squeezed
                write_wigner_csv(os.path.join(out, f"wigner_m{total_photons}.csv"), grid)
        write_csv(
            os.path.join(out, "fits.csv"),
            ["total_photons", "alpha", "phi", "r", "fidelity", "parity"],
            rows,
        )
        worst = min(r[4] for r in rows)
        checks.append(
            {"name": "squeezed-cat fit fidelity > 0.999 for 1-4 photons", "value": worst, "passed": bool(worst > 0.999)}
        )
        par_ok = all((r[0] % 2 == 0) == (r[5] > 0) and abs(r[5]) > 0.99 for r in rows)
        checks.append({"name": "even/odd parity matches photon parity", "value": float(par_ok), "passed": bool(par_ok)})

    elif kind == "loss_sweep":
        db = cfg.squeezing_db[0]
        r = db_to_r(db)
        etas = cfg.loss_eta or (1.0, 0.999, 0.995, 0.99)
        ncount = cfg.post_select_n if cfg.post_select_n is not None else 1
        mval = cfg.post_select_m if cfg.post_select_m is not None else 0.0
        table = {}
        for eta in etas:
            loss = None
            if eta < 1.0:
                spec = LossSpec(eta, cfg.loss_truncation)
                loss = {loc: spec for loc in cfg.loss_locations}
            step_cfg = PhantmStepConfig(
                r_cluster=r, engine="kraus", forced_n=ncount, forced_m=mval, loss=loss
            )
            state = squeezed_vacuum(r, cfg.cutoff).dm()
            values = []
            for k in range(cfg.steps):
                state, _ = phantm_step(state, step_cfg, None, 2 * k)
                state, _ = phantm_step(state, _plain_config(step_cfg), None, 2 * k + 1)
                values.append(wln(state, refine_check=False))
            table[eta] = values
        rows = [
            tuple([k + 1] + [table[eta][k] for eta in etas]) for k in range(cfg.steps)
        ]
        write_csv(
            os.path.join(out, "wln_vs_step.csv"),
            ["step"] + [f"wln_eta_{_fmt(e)}" for e in etas],
            rows,
        )
        lossless = table[etas[0]]
        checks.append(
            {
                "name": "lossless WLN rises and plateaus",
                "value": lossless[-1],
                "passed": bool(lossless[-1] > 0.9 * max(lossless)),
            }
        )
        for eta in etas[1:]:
            vals = table[eta]
            peaked = max(vals) > vals[-1] and max(vals) > vals[0]
            checks.append(
                {
                    "name": f"WLN(eta={eta}) rises then decays",
                    "value": vals[-1] / max(vals),
                    "passed": bool(peaked),
                }
            )

    elif kind == "disp_error":
        db = cfg.squeezing_db[0]
        r = db_to_r(db)
        ncount = cfg.post_select_n if cfg.post_select_n is not None else 2
        mval = cfg.post_select_m if cfg.post_select_m is not None else 0.0
        dalphas = [complex(s) for s in cfg.options.get("dalpha", "0, 0.2, 0.2j").split(",")]
        rows = []
        wln0 = None
        for da in dalphas:
            step_cfg = PhantmStepConfig(
                r_cluster=r,
                engine="kraus",
                forced_n=ncount,
                forced_m=mval,
                displacement_error=da if da != 0 else None,
            )
            state, _ = phantm_step(squeezed_vacuum(r, cfg.cutoff), step_cfg, None)
            res = fit(state, "weighted_cat", multistart=8)
            val = wln(state, refine_check=False)
            if wln0 is None:
                wln0 = val
            rows.append(
                (
                    f"{da.real:g}{da.imag:+g}j",
                    res["A"],
                    res["B"],
                    res["alpha"],
                    res["r"],
                    res.fidelity,
                    val,
                )
            )
        write_csv(
            os.path.join(out, "results.csv"),
            ["dalpha", "A", "B", "alpha_shift", "r", "fit_fidelity", "wln"],
            rows,
        )
        drop = min(row[6] for row in rows) / wln0 if wln0 else 0.0
        checks.append(
            {
                "name": "WLN decreases by < 20% across displacement errors",
                "value": drop,
                "passed": bool(drop > 0.8),
            }
        )

    elif kind == "macronode_weighting":
        from .macronode import (
            MacronodeConfig,
            WeightedCat,
            rebalance_step,
            weighted_cat_m2_pdf,
            weighted_cat_q2_expectation,
            sample_m2_circuit,
        )

        db = cfg.squeezing_db[0]
        r0 = db_to_r(db)
        a2 = float(cfg.options.get("a_squared", 0.8))
        alpha = float(cfg.options.get("alpha", 4.0))
        wc = WeightedCat(np.sqrt(a2), np.sqrt(1.0 - a2), alpha, 0.0)
        m2_grid = np.linspace(-4.0, 4.0, int(cfg.options.get("m2_points", 17)))
        rows = []
        for m2 in m2_grid:
            mc = MacronodeConfig(r0=r0, forced_m1=0.0, forced_m2=float(m2))
            res, _, _ = rebalance_step(wc, mc, None, cutoff=cfg.cutoff)
            rows.append((m2, res["A"] ** 2, res["B"] ** 2, res.fidelity))
        write_csv(
            os.path.join(out, "weighting.csv"),
            ["m2", "A_prime_sq", "B_prime_sq", "fit_fidelity"],
            rows,
        )
        aps = [row[1] for row in rows]
        monotone = all(aps[i + 1] <= aps[i] + 0.02 for i in range(len(aps) - 1))
        crosses = (max(aps) > 0.5) and (min(aps) < 0.5)
        checks.append(
            {"name": "A'^2 decreases with m2 and crosses 1/2", "value": float(monotone and crosses), "passed": bool(monotone and crosses)}
        )
        q2 = weighted_cat_q2_expectation(wc)
        samples = []
        rng = trial_rng(cfg.seed, 0)
        state = wc.state(cfg.cutoff)
        for _ in range(int(cfg.options.get("samples", 2000))):
            val, _ = sample_m2_circuit(state, r0, rng)
            samples.append(val)
        write_csv(os.path.join(out, "m2_samples.csv"), ["m2"], [(s,) for s in samples])
        checks.append(
            {
                "name": "sampled mean m2 near <Q2> prediction",
                "value": float(np.mean(samples)),
                "passed": bool(abs(np.mean(samples) - q2) < 0.15),
            }
        )

    elif kind == "breed_qunaught":
        db = cfg.squeezing_db[0]
        args = [
            (t, cfg.seed, db, cfg.cutoff, cfg.options, cfg.post_select_m) for t in range(cfg.trials)
        ]
        rows = _fan_out(cfg, _qunaught_trial, args)
        write_csv(
            os.path.join(out, "results.csv"),
            ["trial", "cat_alpha", "cat_r", "delta", "spacing", "s_gkp_db", "fidelity", "converged"],
            rows,
        )
        fids = [row[6] for row in rows]
        checks.append(
            {
                "name": "mean qunaught fit fidelity >= 0.90",
                "value": float(np.mean(fids)),
                "passed": bool(np.mean(fids) >= 0.90),
            }
        )

    manifest = {
        "experiment": cfg.experiment,
        "version": __version__,
        "seed": cfg.seed,
        "trials": cfg.trials,
        "steps": cfg.steps,
        "cutoff": cfg.cutoff,
        "squeezing_db": list(cfg.squeezing_db),
        "rng_scheme": RNG_SCHEME,
        "config_sha256": config_text_hash(config_path) if config_path else None,
        "checks": checks,
    }
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out


def report(bundle_dir: str) -> tuple[str, bool]:
    """Render the bundle summary with one pass/fail line per stored check."""
    manifest_path = os.path.join(bundle_dir, "manifest.json")
    if not os.path.exists(manifest_path):
        raise ConfigError(f"missing manifest.json in {bundle_dir}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    lines = [
        f"experiment: {manifest['experiment']}  (seed {manifest['seed']}, "
        f"{manifest['trials']} trials, cutoff {manifest['cutoff']})",
        f"version: {manifest['version']}  config sha256: {manifest.get('config_sha256')}",
    ]
    summary_path = os.path.join(bundle_dir, "summary.csv")
    if os.path.exists(summary_path):
        with open(summary_path, newline="") as fh:
            rows = list(csv.reader(fh))
        lines.append("summary (last step): " + ", ".join(f"{h}={v}" for h, v in zip(rows[0], rows[-1])))
    all_ok = True
    for check in manifest.get("checks", []):
        ok = bool(check["passed"])
        all_ok = all_ok and ok
        lines.append(f"[{'PASS' if ok else 'FAIL'}] {check['name']} (value {check['value']:.6g})")
    if not manifest.get("checks"):
        lines.append("[PASS] no acceptance checks declared for this experiment")
    return "\n".join(lines), all_ok
