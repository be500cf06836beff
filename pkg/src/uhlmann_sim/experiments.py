"""Batch experiments: configuration, per-trial seeding, named suites, reports.

Every trial draws its instance from ``numpy.random.default_rng(seed + i)``,
so a record does not depend on how trials are spread over workers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import applications as app
from . import uhlmann as uh
from .dme import DmePlan, dme_exponentiate
from .ledger import ResourceLedger
from .linalg import expm_hermitian
from .metrics import diamond_distance
from .states import (
    StatePrepOracle,
    amplitude_damping,
    canonical_purification_exact,
    dephasing,
    random_density,
    random_pure,
    unitary_channel,
)

ENV_PREFIX = "UHLMANN_SIM_"
MAX_TOTAL_DIM = 256
MAX_DIAMOND_DIM = 64
LEDGER_COLUMNS = ("u", "w", "zeta", "m", "q")


class ConfigError(ValueError):
    pass


def parse_dims(text):
    """'A=2,B=3' or '2,3' (labels A, B, C, ...) to an ordered dict."""
    if isinstance(text, dict):
        return {str(k): int(v) for k, v in text.items()}
    out = {}
    for k, tok in enumerate(t for t in str(text).replace(" ", "").split(",") if t):
        if "=" in tok or ":" in tok:
            lab, val = tok.replace(":", "=").split("=", 1)
        else:
            lab, val = chr(ord("A") + k), tok
        out[lab] = int(val)
    return out


@dataclass
class ExperimentConfig:
    suite: str = "uhlmann-oracle"
    dims: dict = field(default_factory=lambda: {"A": 2, "B": 2})
    delta: float = 0.1
    mode: str = "fidelity"
    trials: int = 10
    seed: int = 0
    output_path: str | None = None
    workers: int = 1

    def __post_init__(self):
        self.dims = parse_dims(self.dims)
        self.delta = float(self.delta)
        self.trials = int(self.trials)
        self.seed = int(self.seed)
        self.workers = int(self.workers)

    def validate(self):
        if self.suite not in SUITES:
            raise ConfigError(f"unknown suite {self.suite!r}; known: {', '.join(sorted(SUITES))}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not (0 < self.delta < 1):
            raise ConfigError("delta must lie in (0, 1)")
        if not (0 <= self.seed < 2 ** 64):
            raise ConfigError("seed is a 64-bit unsigned integer")
        if any(d < 1 for d in self.dims.values()):
            raise ConfigError("dimensions are positive")
        total = int(np.prod(list(self.dims.values())))
        if total > MAX_TOTAL_DIM:
            raise ConfigError(f"total dimension {total} exceeds the cap {MAX_TOTAL_DIM}")
        if SUITES[self.suite].diamond:
            dB = self.dims.get("B", total)
            if dB * dB > MAX_DIAMOND_DIM:
                raise ConfigError(f"diamond checks are capped at Choi dimension {MAX_DIAMOND_DIM}")
        return self

    def to_dict(self):
        return asdict(self)


_KEYS = {f.name for f in ExperimentConfig.__dataclass_fields__.values()}
_ALIASES = {"out": "output_path", "epsilon": "delta", "model": "mode"}


def _normalize(raw):
    out = {}
    for k, v in raw.items():
        key = k.strip().lower().replace("-", "_")
        key = _ALIASES.get(key, key)
        if key not in _KEYS:
            raise ConfigError(f"unknown config key {k!r}")
        out[key] = v
    return out


def read_config_file(path):
    """Flat ``key = value`` text; '#' starts a comment."""
    raw = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{n}: expected key = value")
            k, v = line.split("=", 1)
            raw[k.strip()] = v.strip()
    return _normalize(raw)


def env_overrides(environ=None):
    environ = os.environ if environ is None else environ
    raw = {k[len(ENV_PREFIX):]: v for k, v in environ.items() if k.startswith(ENV_PREFIX)}
    return _normalize(raw)


def build_config(path=None, overrides=None, environ=None):
    """Defaults < config file < environment < explicit overrides."""
    merged = {}
    if path:
        merged.update(read_config_file(path))
    merged.update(env_overrides(environ))
    merged.update(_normalize({k: v for k, v in (overrides or {}).items() if v is not None}))
    return ExperimentConfig(**merged).validate()


# ---------------------------------------------------------------------------
# suites


@dataclass(frozen=True)
class Suite:
    name: str
    fn: object
    diamond: bool = False
    doc: str = ""


SUITES = {}


def suite(name, diamond=False):
    def deco(fn):
        SUITES[name] = Suite(name, fn, diamond, (fn.__doc__ or "").strip())
        return fn
    return deco


def _dAB(cfg):
    return cfg.dims.get("A", 2), cfg.dims.get("B", cfg.dims.get("A", 2))


def _ledger_cols(ledger, params):
    row = {}
    for c in LEDGER_COLUMNS:
        if c in params:
            row[c] = params[c]
        elif c == "q" and "q_rho" in params:
            row[c] = params["q_rho"]
    for key, bound in ledger.bounds.items():
        row[f"bound[{key}]"] = bound
        try:
            row[f"count[{key}]"] = ledger.counter(key)
        except KeyError:
            pass
    return row


@suite("uhlmann-oracle")
def _oracle(cfg, rng):
    """Exact Uhlmann isometry reproduces F(ρ_A, σ_A)."""
    dA, dB = _dAB(cfg)
    r, s = random_pure(dA * dB, rng), random_pure(dA * dB, rng)
    Fa, Fe = uh.uhlmann_fidelity_check(r, s, (dA, dB))
    err = abs(Fa - Fe)
    return {"achieved": Fa, "target": Fe, "error": err, "slack": 1e-9 - err}


def _alg_trial(res, delta):
    p = res.params
    if res.mode == "diamond":
        ach = res.diamond
        slack = delta - ach
    else:
        ach = res.fidelity_achieved
        slack = ach - (res.fidelity_target - delta)
    row = {"achieved": ach, "target": res.fidelity_target, "slack": slack}
    row.update(_ledger_cols(res.ledger, p))
    return row


@suite("alg1-fidelity")
def _alg1f(cfg, rng):
    """Purified query access, fidelity guarantee."""
    dA, dB = _dAB(cfg)
    lay = [("A", dA), ("B", dB)]
    led = ResourceLedger("alg1")
    U1 = StatePrepOracle.from_state(random_pure(dA * dB, rng), lay, "U_rho")
    U2 = StatePrepOracle.from_state(random_pure(dA * dB, rng), lay, "U_sigma")
    res = uh.uhlmann_purified_query(U1, U2, cfg.delta, "fidelity", ledger=led)
    return _alg_trial(res, cfg.delta)


@suite("alg1-diamond", diamond=True)
def _alg1d(cfg, rng):
    """Purified query access, diamond guarantee."""
    dA, dB = _dAB(cfg)
    lay = [("A", dA), ("B", dB)]
    U1 = StatePrepOracle.from_state(random_pure(dA * dB, rng), lay, "U_rho")
    U2 = StatePrepOracle.from_state(random_pure(dA * dB, rng), lay, "U_sigma")
    res = uh.uhlmann_purified_query(U1, U2, cfg.delta, "diamond")
    return _alg_trial(res, cfg.delta)


@suite("alg2-fidelity")
def _alg2f(cfg, rng):
    """Purified sample access through DMESUB."""
    dA, dB = _dAB(cfg)
    r, s = random_pure(dA * dB, rng), random_pure(dA * dB, rng)
    res = uh.uhlmann_purified_sample(r, s, cfg.delta, "fidelity", dims=(dA, dB))
    return _alg_trial(res, cfg.delta)


@suite("alg3-fidelity")
def _alg3f(cfg, rng):
    """Mixed sample access via approximate canonical purifications."""
    d = cfg.dims.get("A", 2)
    res = uh.uhlmann_mixed_sample(random_density(d, rng), random_density(d, rng), cfg.delta)
    return _alg_trial(res, cfg.delta)


@suite("alg5-fidelity")
def _alg5f(cfg, rng):
    """The variant acting on A of the canonical purification."""
    d = cfg.dims.get("A", 2)
    res = uh.variant_uhlmann_mixed(random_density(d, rng), random_density(d, rng), cfg.delta)
    return _alg_trial(res, cfg.delta)


@suite("canonical-purification")
def _canon(cfg, rng):
    """Trace distance of ω̃_c to |ω_c><ω_c|."""
    d = cfg.dims.get("A", 2)
    omega = random_density(d, rng)
    led = ResourceLedger("canonical")
    st, info = uh.canonical_purification_alg(omega, cfg.delta, led, "omega", return_info=True)
    err = info["error"]
    return {"achieved": err, "target": 0.0, "slack": cfg.delta - err, "u": info["u"],
            "q": info["q"]}


@suite("dme", diamond=True)
def _dme(cfg, rng):
    """DME at t = 2 against the exact unitary channel."""
    d = cfg.dims.get("A", 2)
    rho = random_density(d, rng)
    plan = DmePlan(2.0, cfg.delta)
    ch = dme_exponentiate(rho, plan)
    ideal = unitary_channel(expm_hermitian(rho, plan.t))
    dist = diamond_distance(ch, ideal).exact
    return {"achieved": dist, "target": 0.0, "slack": cfg.delta - dist, "m": plan.m}


@suite("fidelity-estimation")
def _fidest(cfg, rng):
    """√F estimation by QPE; success probability against 2/3."""
    model = cfg.mode if cfg.mode in app.MODELS else "purified-query"
    dA, dB = _dAB(cfg)
    if model == "mixed-sample":
        inputs = (random_density(dA, rng), random_density(dA, rng))
    else:
        inputs = (random_pure(dA * dB, rng), random_pure(dA * dB, rng))
    rec = app.fidelity_estimate(inputs, cfg.delta, model, dims=(dA, dB))
    lb = rec.success_probability if rec.success_lower_bound is None else rec.success_lower_bound
    row = {"achieved": rec.estimate, "target": rec.target,
           "success_probability": rec.success_probability, "success_lower_bound": lb,
           "slack": min(rec.success_probability, lb) - 2 / 3}
    row.update(_ledger_cols(rec.ledger, rec.params))
    return row


PETZ_CHANNELS = (("amplitude-damping(0.3)", lambda: amplitude_damping(0.3)),
                 ("dephasing(0.5)", lambda: dephasing(0.5)))


@suite("petz-compare")
def _petz(cfg, rng, index=0):
    """Uhlmann-route Petz map against the direct formula (σ = I/2)."""
    name, make = PETZ_CHANNELS[index % len(PETZ_CHANNELS)]
    F = make()
    sigma = np.eye(F.d_in) / F.d_in
    Rd = app.petz_recovery(F, sigma, "direct")
    Ru = app.petz_recovery(F, sigma, "uhlmann", epsilon=cfg.delta)
    dev = app.petz_sweep(Rd, Ru, 500, rng)
    return {"channel": name, "achieved": dev, "target": 0.0, "slack": cfg.delta - dev,
            "v": Ru.params["v"], "u": Ru.params["u"], "m": Ru.params["m"]}


DECOUPLING = (("entanglement-transmission", "identity"), ("entanglement-transmission", "erasure"),
              ("state-merging", "random"), ("state-merging", "max-entangled"))


@suite("decoupling")
def _decouple(cfg, rng, index=0):
    """Decoder fidelity against 1 - ε - δ, ε measured."""
    task, scen = DECOUPLING[index % len(DECOUPLING)]
    rep = app.decoupling_demo(task, scen, cfg.delta, encoder=int(rng.integers(6)),
                              seed=int(rng.integers(2 ** 31)))
    return {"task": task, "scenario": scen, "epsilon": rep.epsilon, "achieved": rep.fidelity,
            "target": rep.bound, "slack": rep.fidelity - rep.bound, "u": rep.details.get("u")}


# ---------------------------------------------------------------------------
# running


@dataclass
class RunRecord:
    config: dict
    trials: list
    passed: bool
    suite_doc: str = ""

    def failing(self):
        return [t for t in self.trials if not t["passed"]]

    def to_dict(self):
        return {"config": self.config, "suite_doc": self.suite_doc, "passed": self.passed,
                "trials": self.trials}

    @classmethod
    def from_dict(cls, d):
        return cls(d["config"], d["trials"], d["passed"], d.get("suite_doc", ""))


def trial_seed(base, index):
    return (int(base) + int(index)) % 2 ** 64


def run_trial(cfg, index):
    s = SUITES[cfg.suite]
    seed = trial_seed(cfg.seed, index)
    rng = np.random.default_rng(seed)
    try:
        row = s.fn(cfg, rng, index) if s.fn.__code__.co_argcount == 3 else s.fn(cfg, rng)
        err = None
    except Exception as exc:  # a crashing trial is a failing trial, not a crashed run
        row, err = {"slack": -math.inf}, f"{type(exc).__name__}: {exc}"
    slack = row.get("slack")
    passed = err is None and slack is not None and slack >= 0
    out = {"trial": index, "seed": seed, "passed": passed, **row}
    if err:
        out["error"] = err
    return out


def _run_one(args):
    return run_trial(*args)


def run_experiment(config):
    cfg = config.validate() if isinstance(config, ExperimentConfig) else build_config(overrides=config)
    jobs = [(cfg, i) for i in range(cfg.trials)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            trials = list(ex.map(_run_one, jobs))
    else:
        trials = [_run_one(j) for j in jobs]
    trials.sort(key=lambda t: t["trial"])
    rec = RunRecord(cfg.to_dict(), trials, all(t["passed"] for t in trials), SUITES[cfg.suite].doc)
    if cfg.output_path:
        from .io import write_csv, write_json

        base = cfg.output_path[:-5] if cfg.output_path.endswith(".json") else cfg.output_path
        write_json(base + ".json", rec)
        write_csv(base + ".csv", trials)
    return rec


def report(records):
    """Aggregate pass/fail per suite and the ledger-vs-formula table."""
    if not records:
        raise ValueError("report needs at least one record")
    suites, table, failures = {}, [], []
    for rec in records:
        rec = rec if isinstance(rec, RunRecord) else RunRecord.from_dict(rec)
        name = rec.config["suite"]
        agg = suites.setdefault(name, {"trials": 0, "failed": 0})
        agg["trials"] += len(rec.trials)
        for t in rec.trials:
            if not t["passed"]:
                agg["failed"] += 1
                failures.append({"suite": name, "trial": t["trial"], "seed": t["seed"],
                                 "slack": t.get("slack"), "error": t.get("error")})
            row = {"suite": name, "seed": t["seed"]}
            for c in LEDGER_COLUMNS:
                row[c] = t.get(c)
            row.update({k: v for k, v in t.items() if k.startswith("bound[") or k.startswith("count[")})
            table.append(row)
    for agg in suites.values():
        agg["passed"] = agg["failed"] == 0
    return {"suites": suites, "ledger_table": table, "failures": failures,
            "passed": not failures}
