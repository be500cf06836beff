"""Command line: ``uhlmann-sim <subcommand>``.

Single runs (uhlmann, fidelity, petz, decouple, dme) print one JSON record.
``suite`` runs a named batch and writes JSON + CSV; ``report`` aggregates
saved records and exits nonzero when any trial failed.
"""

from __future__ import annotations

import json
import sys

import click
import numpy as np

from . import applications as app
from . import experiments as ex
from . import uhlmann as uh
from .dme import DmePlan, dme_exponentiate
from .io import dumps, load_state, write_json
from .linalg import expm_hermitian
from .metrics import diamond_distance
from .states import StatePrepOracle, random_density, random_pure, unitary_channel


def _emit(obj, out):
    if out:
        write_json(out, obj)
    click.echo(dumps(obj))


def _state_or_random(path, kind, d, rng):
    if path:
        return load_state(path)[0]
    return random_pure(d, rng) if kind == "pure" else random_density(d, rng)


common = [
    click.option("--dims", default="2,2", show_default=True, help="e.g. 2,2 or A=2,B=2"),
    click.option("--delta", type=float, default=0.1, show_default=True),
    click.option("--seed", type=int, default=0, show_default=True),
    click.option("--out", type=click.Path(dir_okay=False), default=None),
]


def with_common(fn):
    for opt in reversed(common):
        fn = opt(fn)
    return fn


@click.group(context_settings={"auto_envvar_prefix": "UHLMANN_SIM"})
def main():
    """Dense simulation of Uhlmann-transformation algorithms."""


@main.command()
@with_common
@click.option("--mode", type=click.Choice(["fidelity", "diamond"]), default="fidelity")
@click.option("--algorithm", type=click.Choice(["alg1", "alg2", "alg3", "alg5"]), default="alg1")
@click.option("--rho", "rho_path", type=click.Path(exists=True), default=None)
@click.option("--sigma", "sigma_path", type=click.Path(exists=True), default=None)
def uhlmann(dims, delta, seed, out, mode, algorithm, rho_path, sigma_path):
    """Run one Uhlmann algorithm on random (or file) inputs."""
    d = ex.parse_dims(dims)
    dA, dB = d.get("A", 2), d.get("B", d.get("A", 2))
    rng = np.random.default_rng(seed)
    if algorithm in ("alg3", "alg5"):
        rho = _state_or_random(rho_path, "mixed", dA, rng)
        sigma = _state_or_random(sigma_path, "mixed", dA, rng)
        fn = uh.uhlmann_mixed_sample if algorithm == "alg3" else uh.variant_uhlmann_mixed
        res = fn(rho, sigma, delta, mode)
    else:
        r = _state_or_random(rho_path, "pure", dA * dB, rng)
        s = _state_or_random(sigma_path, "pure", dA * dB, rng)
        if algorithm == "alg1":
            lay = [("A", dA), ("B", dB)]
            res = uh.uhlmann_purified_query(StatePrepOracle.from_state(r, lay, "U_rho"),
                                            StatePrepOracle.from_state(s, lay, "U_sigma"),
                                            delta, mode)
        else:
            res = uh.uhlmann_purified_sample(r, s, delta, mode, dims=(dA, dB))
    _emit(res.to_dict(), out)


@main.command()
@with_common
@click.option("--mode", type=click.Choice(app.MODELS), default="purified-query")
def fidelity(dims, delta, seed, out, mode):
    """Estimate √F by phase estimation in one access model."""
    d = ex.parse_dims(dims)
    dA, dB = d.get("A", 2), d.get("B", d.get("A", 2))
    rng = np.random.default_rng(seed)
    if mode == "mixed-sample":
        inputs = (random_density(dA, rng), random_density(dA, rng))
    else:
        inputs = (random_pure(dA * dB, rng), random_pure(dA * dB, rng))
    rec = app.fidelity_estimate(inputs, delta, mode, dims=(dA, dB))
    d_out = rec.to_dict()
    d_out["success_probability"] = rec.success_probability
    _emit(d_out, out)


@main.command()
@click.option("--channel", type=click.Choice(["amplitude-damping", "dephasing"]),
              default="amplitude-damping")
@click.option("--param", type=float, default=None, help="γ or p (defaults 0.3 / 0.5)")
@click.option("--epsilon", type=float, default=0.3, show_default=True)
@click.option("--inputs", type=int, default=500, show_default=True)
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def petz(channel, param, epsilon, inputs, seed, out):
    """Compare the Uhlmann-route Petz map with the direct formula."""
    from .states import amplitude_damping, dephasing

    F = amplitude_damping(0.3 if param is None else param) if channel == "amplitude-damping" \
        else dephasing(0.5 if param is None else param)
    sigma = np.eye(2) / 2
    Rd = app.petz_recovery(F, sigma, "direct")
    Ru = app.petz_recovery(F, sigma, "uhlmann", epsilon=epsilon)
    dev = app.petz_sweep(Rd, Ru, inputs, np.random.default_rng(seed))
    _emit({"channel": channel, "epsilon": epsilon, "max_deviation": dev, "ok": dev <= epsilon,
           "params": uh._jsonable(Ru.params), "ledger": Ru.ledger.to_dict()}, out)


@main.command()
@click.option("--task", type=click.Choice(["entanglement-transmission", "state-merging"]),
              default="entanglement-transmission")
@click.option("--scenario", default="identity", show_default=True,
              help="identity | erasure | random | max-entangled")
@click.option("--model", type=click.IntRange(1, 2), default=1)
@click.option("--encoder", type=int, default=0)
@click.option("--delta", type=float, default=0.1)
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def decouple(task, scenario, model, encoder, delta, seed, out):
    """Decoupling demo; compares the decoder fidelity with 1 - ε - δ."""
    rep = app.decoupling_demo(task, scenario, delta, model=model, encoder=encoder, seed=seed)
    _emit(rep.to_dict(), out)


@main.command()
@click.option("--t", "t", type=float, default=2.0, show_default=True)
@click.option("--delta", type=float, default=0.25, show_default=True)
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def dme(t, delta, seed, out):
    """Density-matrix exponentiation on a random qubit state."""
    rho = random_density(2, np.random.default_rng(seed))
    plan = DmePlan(t, delta)
    dist = diamond_distance(dme_exponentiate(rho, plan), unitary_channel(expm_hermitian(rho, t)))
    _emit({"t": t, "delta": delta, "m": plan.m, "diamond": dist.exact, "ok": dist.exact <= delta},
          out)


@main.command("suite")
@click.option("--suite", "suite_name", default=None, help="one of: " + ", ".join(sorted(ex.SUITES)))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--dims", default=None)
@click.option("--delta", type=float, default=None)
@click.option("--mode", default=None)
@click.option("--trials", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--workers", type=int, default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def run_suite(suite_name, config_path, dims, delta, mode, trials, seed, workers, out):
    """Run a named suite and write JSON + CSV."""
    try:
        cfg = ex.build_config(config_path, {"suite": suite_name, "dims": dims, "delta": delta,
                                            "mode": mode, "trials": trials, "seed": seed,
                                            "workers": workers, "output_path": out})
    except (ex.ConfigError, TypeError) as exc:
        raise click.UsageError(str(exc))
    rec = ex.run_experiment(cfg)
    n_fail = len(rec.failing())
    click.echo(f"{cfg.suite}: {len(rec.trials) - n_fail}/{len(rec.trials)} passed")
    for t in rec.failing():
        click.echo(f"  FAIL trial {t['trial']} seed {t['seed']} slack {t.get('slack')}"
                   + (f" ({t['error']})" if "error" in t else ""))
    sys.exit(0 if rec.passed else 1)


@main.command("report")
@click.argument("records", nargs=-1, type=click.Path(exists=True))
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def report_cmd(records, out):
    """Aggregate saved run records; exit 1 on any failing trial."""
    if not records:
        raise click.UsageError("give at least one record file")
    recs = []
    for p in records:
        with open(p) as fh:
            recs.append(json.load(fh))
    summary = ex.report(recs)
    for name, agg in summary["suites"].items():
        status = "PASS" if agg["passed"] else "FAIL"
        click.echo(f"{status} {name}: {agg['trials'] - agg['failed']}/{agg['trials']}")
    cols = ("suite", "seed") + ex.LEDGER_COLUMNS
    click.echo("\t".join(cols))
    for row in summary["ledger_table"]:
        click.echo("\t".join("" if row.get(c) is None else str(row.get(c)) for c in cols))
    for f in summary["failures"]:
        click.echo(f"failing seed {f['seed']} (suite {f['suite']}, trial {f['trial']})")
    if out:
        write_json(out, summary)
    sys.exit(0 if summary["passed"] else 1)


if __name__ == "__main__":  # pragma: no cover
    main()
