"""Experiment configuration, the construct / train / verify / sweep pipelines,
and the checks that decide the CLI exit status.

Every random quantity is drawn from a stream keyed on ``master_seed`` plus
a fixed tag, so any job can run in any process and still reproduce.

Output layout under ``out_dir``::

    construction.csv                 index, mu, ga_bit_error, is_message
    traces/trace_bit{i}_B{B}.csv     epoch, mse, val_mse, drift
    checkpoints/onn_bit{i}_B{B}.npz  bit_index, B, d, seed, W0, W, a
    bound_report.csv                 one row per (bit, rho)
    sweep.csv                        one row per (mode, width, ebn0)
    checks_<command>.csv             name, hard, passed, detail
    manifest.json                    config snapshot, file hashes, failures
"""

from __future__ import annotations

import csv
import dataclasses
import datetime
import hashlib
import json
import math
import os
import subprocess
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .channel import ebn0_to_sigma2, make_rng
from .decoder import DecoderBank, EvalResult, append_eval_csv, evaluate
from .errors import InvalidState, TrainingDiverged
from .onn import (OnnModel, TrainConfig, forward, init_model, load_checkpoint, save_checkpoint,
                  population_mse_estimate, train, weight_drift)
from .polar import CodeConfig, construct_code, write_construction_csv
from .posterior import empirical_low_margin, generate_dataset
from .theory import (BoundReport, bit_error_bound, convergence_envelope, drift_radius_tau,
                     empirical_gram, ga_low_margin, gamma_shape, limiting_gram,
                     training_gain_db, write_bound_reports)

WORKERS_ENV = "ONNPOLAR_WORKERS"

# dataset streams
TRAIN_STREAM, VAL_STREAM, TEST_STREAM = 0, 1, 2
# tags for make_rng keys
_INIT_TAG, _SHUFFLE_TAG = 10, 11
VERIFY_EVAL_STREAM = 99
SWEEP_EVAL_STREAM = 100

PROFILES = {
    "desk": dict(
        n=4, K=8, ebn0_train_db=0.0, ebn0_db=(0.0, 2.0, 4.0, 6.0, 8.0, 10.0),
        widths=(1024, 4096, 8192), eta0=1e-2, b_ref=1024, epochs=2000, batch_size=256,
        D_train=10_000, D_val=10_000, D_test=100_000, rho=(0.6,), trials=100_000,
        gram_D=128, delta=0.05, dtype="float32", prefix_mode="literal",
    ),
    # full-scale budget, with the training set and epochs read as per bit-channel
    "full": dict(
        n=4, K=8, ebn0_train_db=0.0, ebn0_db=(0.0, 2.0, 4.0, 6.0, 8.0, 10.0),
        widths=(1024, 2048, 4096, 8192, 32768), eta0=1e-2, b_ref=1024, epochs=50_000,
        batch_size=256, D_train=2_000_000, D_val=10_000, D_test=1_000_000, rho=(0.6,),
        trials=1_000_000, gram_D=128, delta=0.05, dtype="float32", prefix_mode="literal",
    ),
}

_TUPLE_KEYS = ("ebn0_db", "widths", "rho")


@dataclass(frozen=True)
class ExperimentConfig:
    """All knobs of one experiment.  ``master_seed`` has no default."""

    master_seed: int
    n: int = 4
    K: int = 8
    ebn0_train_db: float = 0.0
    ebn0_db: tuple = (0.0, 2.0, 4.0, 6.0, 8.0, 10.0)
    widths: tuple = (1024, 4096, 8192)
    eta0: float = 1e-2
    b_ref: int = 1024
    epochs: int = 2000
    batch_size: int = 256
    D_train: int = 10_000
    D_val: int = 10_000
    D_test: int = 100_000
    rho: tuple = (0.6,)
    trials: int = 100_000
    gram_D: int = 128
    delta: float = 0.05
    dtype: str = "float32"
    prefix_mode: str = "literal"
    out_dir: str = "runs"
    profile: str = "desk"

    def __post_init__(self):
        for k in _TUPLE_KEYS:
            object.__setattr__(self, k, tuple(getattr(self, k)))
        object.__setattr__(self, "ebn0_db", tuple(float(v) for v in self.ebn0_db))
        object.__setattr__(self, "rho", tuple(float(v) for v in self.rho))
        object.__setattr__(self, "widths", tuple(int(v) for v in self.widths))
        if isinstance(self.master_seed, bool) or not isinstance(self.master_seed, (int, np.integer)):
            raise ValueError("master_seed must be an integer")
        if self.master_seed < 0:
            raise ValueError("master_seed must be nonnegative")
        if self.n < 1 or not 0 < self.K <= 2 ** self.n:
            raise ValueError("need n >= 1 and 0 < K <= 2^n")
        if not self.widths or min(self.widths) < 1:
            raise ValueError("widths must be positive")
        if not self.ebn0_db:
            raise ValueError("ebn0_db must not be empty")
        if not self.rho or not all(0 < r < 1 for r in self.rho):
            raise ValueError("rho values must lie in (0, 1)")
        if min(self.D_train, self.D_val, self.D_test, self.trials, self.gram_D, self.epochs) < 1:
            raise ValueError("sizes and counts must be >= 1")
        if self.gram_D > self.D_train:
            raise ValueError("gram_D cannot exceed D_train")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")
        if self.prefix_mode not in ("literal", "bipolar"):
            raise ValueError("prefix_mode must be literal or bipolar")
        # validates eta0 / b_ref
        self.train_config(1, 1)

    @classmethod
    def from_profile(cls, profile: str = "desk", **overrides) -> "ExperimentConfig":
        if profile not in PROFILES:
            raise ValueError(f"unknown profile {profile!r}")
        return cls(**{**PROFILES[profile], "profile": profile, **overrides})

    @classmethod
    def from_file(cls, path, profile: str | None = None, **overrides) -> "ExperimentConfig":
        """Load a flat TOML file; keys not in the file come from ``profile``."""
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        prof = profile or data.pop("profile", "desk")
        data.pop("profile", None)
        return cls.from_profile(prof, **{**data, **overrides})

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    def to_toml(self) -> str:
        def fmt(v):
            if isinstance(v, str):
                return json.dumps(v)
            if isinstance(v, tuple):
                return "[" + ", ".join(fmt(x) for x in v) + "]"
            if isinstance(v, float):
                return repr(v)
            return str(int(v))
        return "".join(f"{k} = {fmt(v)}\n" for k, v in self.as_dict().items())

    @property
    def rate(self) -> float:
        return self.K / 2 ** self.n

    @property
    def sigma2_train(self) -> float:
        return ebn0_to_sigma2(self.ebn0_train_db, self.rate)

    def code(self):
        """(CodeConfig, ReliabilityProfile) constructed at the training SNR."""
        return construct_code(self.n, self.K, self.sigma2_train)

    def train_config(self, bit: int, B: int) -> TrainConfig:
        ss = np.random.SeedSequence(self.master_seed, spawn_key=(_SHUFFLE_TAG, bit, B))
        return TrainConfig(eta0=self.eta0, b_ref=self.b_ref, epochs=self.epochs,
                           batch_size=self.batch_size, seed=int(ss.generate_state(1)[0]),
                           dtype=self.dtype)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    hard: bool
    detail: str = ""


def write_checks(path, checks) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "hard", "passed", "detail"])
        for c in checks:
            w.writerow([c.name, int(c.hard), int(c.passed), c.detail])


def hard_failures(checks) -> list:
    return [c for c in checks if c.hard and not c.passed]


# ---------------------------------------------------------------- paths

def trace_path(out, bit: int, B: int) -> Path:
    return Path(out) / "traces" / f"trace_bit{bit:02d}_B{B}.csv"


def checkpoint_path(out, bit: int, B: int) -> Path:
    return Path(out) / "checkpoints" / f"onn_bit{bit:02d}_B{B}.npz"


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer") from None


# ---------------------------------------------------------------- manifest

def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _build_id() -> str:
    try:
        rev = subprocess.run(["git", "rev-parse", "HEAD"], cwd=Path(__file__).parent,
                             capture_output=True, text=True, timeout=10)
        if rev.returncode == 0:
            return rev.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return "unknown"


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


class RunManifest:
    """JSON record of the config, every emitted file (with hash) and failures."""

    def __init__(self, out):
        self.path = Path(out) / "manifest.json"
        self.out = Path(out)
        if self.path.exists():
            self.data = json.loads(self.path.read_text())
        else:
            self.data = {"config": None, "build": {}, "files": {}, "runs": [], "failures": []}

    def begin(self, command: str, cfg: ExperimentConfig) -> dict:
        self.data["config"] = cfg.as_dict()
        self.data["config_toml"] = cfg.to_toml()
        self.data["build"] = {"package_version": __version__, "git": _build_id()}
        run = {"command": command, "started": _now(), "finished": None}
        self.data["runs"].append(run)
        return run

    def add_file(self, path) -> None:
        rel = str(Path(path).relative_to(self.out))
        self.data["files"][rel] = _sha256(path)

    def record_failure(self, command: str, **info) -> None:
        self.data["failures"].append({"command": command, **info})

    def finish(self, run: dict) -> None:
        run["finished"] = _now()
        self.save()

    def save(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(self.data, indent=2, sort_keys=True, default=_jsonable))


def _jsonable(v):
    if isinstance(v, tuple):
        return list(v)
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(f"not serializable: {type(v)}")


# ---------------------------------------------------------------- construct

def run_construct(cfg: ExperimentConfig, out=None) -> Path:
    out = Path(out or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    code, profile = cfg.code()
    path = out / "construction.csv"
    write_construction_csv(path, profile, code)
    man = RunManifest(out)
    run = man.begin("construct", cfg)
    man.add_file(path)
    man.finish(run)
    return path


# ---------------------------------------------------------------- train

def datasets_for(cfg: ExperimentConfig, code: CodeConfig, bit: int):
    """(train, val) datasets for one bit-channel at the training SNR."""
    s2 = cfg.sigma2_train
    tr = generate_dataset(code, s2, cfg.D_train, bit, cfg.master_seed, TRAIN_STREAM, cfg.prefix_mode)
    va = generate_dataset(code, s2, cfg.D_val, bit, cfg.master_seed, VAL_STREAM, cfg.prefix_mode)
    return tr, va


def train_one(cfg: ExperimentConfig, bit: int, B: int, out) -> dict:
    """Train one (bit, width) model; write its trace and checkpoint."""
    code, _ = cfg.code()
    tr, va = datasets_for(cfg, code, bit)
    model = init_model(B, tr.dim, make_rng(cfg.master_seed, _INIT_TAG, bit, B), bit,
                       dtype=np.dtype(cfg.dtype))
    tc = cfg.train_config(bit, B)
    try:
        trace = train(model, tr, tc, val=va)
    except TrainingDiverged as e:
        return {"bit": bit, "B": B, "status": "diverged", "epoch": e.epoch, "mse": float(e.mse)}
    tp, cp = trace_path(out, bit, B), checkpoint_path(out, bit, B)
    tp.parent.mkdir(parents=True, exist_ok=True)
    cp.parent.mkdir(parents=True, exist_ok=True)
    trace.write_csv(tp)
    save_checkpoint(cp, model, tc.seed)
    return {"bit": bit, "B": B, "status": "ok", "trace": str(tp), "checkpoint": str(cp),
            "mse0": trace.mse[0], "mse": trace.mse[-1], "val_mse": trace.val_mse[-1],
            "drift": trace.drift[-1]}


def _train_job(args):
    cfg_dict, bit, B, out = args
    return train_one(ExperimentConfig(**cfg_dict), bit, B, out)


def run_train(cfg: ExperimentConfig, out=None, workers: int | None = None) -> list[dict]:
    """Train every (bit, width) pair; divergences are recorded, not raised."""
    out = Path(out or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    code, _ = cfg.code()
    jobs = [(cfg.as_dict(), i, B, str(out)) for B in cfg.widths for i in code.message_set]
    workers = worker_count() if workers is None else workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_train_job, jobs))
    else:
        results = [_train_job(j) for j in jobs]
    man = RunManifest(out)
    run = man.begin("train", cfg)
    for r in results:
        if r["status"] == "ok":
            man.add_file(r["trace"])
            man.add_file(r["checkpoint"])
        else:
            man.record_failure("train", **{k: r[k] for k in ("bit", "B", "status", "epoch", "mse")})
    man.finish(run)
    return results


def train_checks(results) -> list[Check]:
    out = []
    for r in results:
        if r["status"] != "ok":
            out.append(Check(f"train_bit{r['bit']}_B{r['B']}", False, True,
                             f"diverged at epoch {r['epoch']}"))
        else:
            out.append(Check(f"train_bit{r['bit']}_B{r['B']}_mse_decreased",
                             r["mse"] < r["mse0"], False, f"{r['mse0']:.4g} -> {r['mse']:.4g}"))
    return out


def load_bank(cfg: ExperimentConfig, B: int, out=None) -> DecoderBank:
    out = Path(out or cfg.out_dir)
    code, _ = cfg.code()
    models = {}
    for i in code.message_set:
        p = checkpoint_path(out, i, B)
        if not p.exists():
            raise InvalidState(f"missing checkpoint {p}")
        models[i], _ = load_checkpoint(p)
    return DecoderBank(code, models, cfg.sigma2_train, cfg.prefix_mode)


def read_trace(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in ("epoch", "mse", "val_mse", "drift")}


# ---------------------------------------------------------------- verify

def _combined_se(*se) -> float:
    return math.sqrt(sum(s * s for s in se))


def bound_reports(cfg: ExperimentConfig, bank: DecoderBank, map_res: EvalResult,
                  onn_res: EvalResult) -> list[BoundReport]:
    """Theory next to measurement for every message bit and rho."""
    code, profile = cfg.code()
    B = bank.width
    reports = []
    for k, i in enumerate(code.message_set):
        model: OnnModel = bank.models[i]
        tr, _ = datasets_for(cfg, code, i)
        test = generate_dataset(code, cfg.sigma2_train, cfg.D_test, i, cfg.master_seed,
                                TEST_STREAM, cfg.prefix_mode)
        Zg = tr.inputs()[: cfg.gram_D]
        lam = limiting_gram(Zg).lambda0
        lam_n = limiting_gram(Zg, normalize=True).lambda0
        lam_e = empirical_gram(model, Zg).lambda0
        tc = cfg.train_config(i, B)
        eta = tc.eta0 * math.sqrt(B / tc.b_ref)
        # residual at initialization over the whole training set
        init = OnnModel(model.W0.copy(), model.a.copy(), model.W0.copy(), i)
        r0 = forward(init, tr.inputs()) - tr.targets
        mse0 = float(np.mean(r0 ** 2))
        mse_fin = float(np.mean((forward(model, tr.inputs()) - tr.targets) ** 2))
        steps = cfg.epochs * math.ceil(cfg.D_train / (cfg.batch_size or cfg.D_train))
        g_db = training_gain_db(eta, lam, cfg.D_train)
        env = float(convergence_envelope(steps, mse0, eta, lam, cfg.D_train))
        tau = drift_radius_tau(cfg.D_train, float(np.linalg.norm(r0)), B, lam)
        gam = gamma_shape(cfg.D_train, B, tau, cfg.delta)
        mse_hat, mse_se = population_mse_estimate(model, test)
        p_map, p_map_se = float(map_res.per_bit_error[k]), float(map_res.per_bit_se[k])
        for rho in cfg.rho:
            a_hat = empirical_low_margin(test, rho)
            a_ga = float(ga_low_margin(profile.mu[i - 1], rho))
            reports.append(BoundReport(
                bit_index=i, rho=rho, B=B, D=cfg.D_train, eta=eta, epochs=cfg.epochs,
                lambda0=lam, lambda0_normalized=lam_n, lambda0_empirical=lam_e,
                G_train_db=g_db, tau=tau, drift_measured=weight_drift(model),
                envelope_term=env, mse_train_final=mse_fin, gamma1=gam[0], gamma2=gam[1], gamma3=gam[2],
                alpha_ga=a_ga, alpha_hat=a_hat, p_map_hat=p_map, p_map_se=p_map_se,
                mse_hat=mse_hat, mse_se=mse_se,
                bound_measured=bit_error_bound(p_map, a_hat, mse_hat, rho),
                bound_ga_shape=min(1.0, p_map + a_ga + (env + sum(gam)) / rho ** 2),
                measured_pe=float(onn_res.per_bit_error[k]),
                measured_pe_se=float(onn_res.per_bit_se[k]),
            ))
    return reports


def low_margin_checks(reports, K: int, D_test: int) -> list[Check]:
    """Rank agreement and per-bit closeness of empirical vs GA low-margin mass."""
    checks = []
    need = math.ceil(0.75 * K)
    for rho in sorted({r.rho for r in reports}):
        rows = [r for r in reports if r.rho == rho]
        a_hat = np.array([r.alpha_hat for r in rows])
        a_ga = np.array([r.alpha_ga for r in rows])
        rs = float(spearmanr(a_hat, a_ga).statistic) if len(rows) > 1 else math.nan
        checks.append(Check(f"low_margin_spearman_rho{rho:g}", bool(rs >= 0.8), True,
                            f"spearman={rs:.4f} (need >= 0.8)"))
        close = np.abs(a_hat - a_ga) <= np.maximum(0.05, 0.5 * a_ga)
        checks.append(Check(f"low_margin_close_rho{rho:g}", int(close.sum()) >= need, True,
                            f"{int(close.sum())}/{len(rows)} bits within max(0.05, 0.5*alpha_ga)"))
    return checks


def decomposition_checks(reports, D_test: int) -> list[Check]:
    """Measured oracle error vs P_MAP + alpha_hat + mse/rho^2 within 3 combined SE."""
    checks = []
    for r in reports:
        a_se = math.sqrt(r.alpha_hat * (1 - r.alpha_hat) / D_test)
        se = _combined_se(r.measured_pe_se, r.p_map_se, a_se, r.mse_se / r.rho ** 2)
        rhs = r.p_map_hat + r.alpha_hat + r.mse_hat / r.rho ** 2
        checks.append(Check(f"decomposition_bit{r.bit_index}_rho{r.rho:g}",
                            bool(r.measured_pe <= rhs + 3 * se), True,
                            f"pe={r.measured_pe:.5f} <= {rhs:.5f} + 3*{se:.2e}"))
        if r.rho == reports[0].rho:
            ok = bool(r.mse_train_final <= r.envelope_term)
            checks.append(Check(f"envelope_bit{r.bit_index}", ok, False, f"final train mse={r.mse_train_final:.4g}, "
                                f"envelope={r.envelope_term:.4g} (shape diagnostic)"))
        checks.append(Check(f"drift_within_tau_bit{r.bit_index}_rho{r.rho:g}",
                            bool(r.drift_measured <= r.tau), False,
                            f"drift={r.drift_measured:.4g}, tau={r.tau:.4g} (shape diagnostic)"))
    return checks


def run_verify(cfg: ExperimentConfig, out=None, width: int | None = None):
    """Bound reports for one bank (default: the widest) plus their checks."""
    out = Path(out or cfg.out_dir)
    B = width or max(cfg.widths)
    bank = load_bank(cfg, B, out)
    code = bank.config
    map_res = evaluate(code, "map_oracle", cfg.ebn0_train_db, cfg.trials, cfg.master_seed,
                       VERIFY_EVAL_STREAM)
    onn_res = evaluate(bank, "oracle", cfg.ebn0_train_db, cfg.trials, cfg.master_seed,
                       VERIFY_EVAL_STREAM)
    reports = bound_reports(cfg, bank, map_res, onn_res)
    checks = low_margin_checks(reports, code.K, cfg.D_test) + decomposition_checks(reports, cfg.D_test)
    rp, cp = out / "bound_report.csv", out / "checks_verify.csv"
    write_bound_reports(rp, reports)
    write_checks(cp, checks)
    man = RunManifest(out)
    run = man.begin("verify", cfg)
    man.add_file(rp)
    man.add_file(cp)
    man.finish(run)
    return reports, checks


# ---------------------------------------------------------------- sweep

def sweep_results(cfg: ExperimentConfig, banks: dict) -> list[EvalResult]:
    """Grid over (mode, width, ebn0) plus the two MAP references per ebn0.

    All decoders at one SNR see the same transmissions.
    """
    code, _ = cfg.code()
    results = []
    for k, eb in enumerate(cfg.ebn0_db):
        stream = SWEEP_EVAL_STREAM + k
        for mode in ("map_oracle", "map_sequential"):
            results.append(evaluate(code, mode, eb, cfg.trials, cfg.master_seed, stream))
        for B in sorted(banks):
            for mode in ("oracle", "sequential"):
                results.append(evaluate(banks[B], mode, eb, cfg.trials, cfg.master_seed, stream))
    return results


def _series(results, mode, width):
    rs = [r for r in results if r.mode == mode and r.width == width]
    return sorted(rs, key=lambda r: r.ebn0_db)


def sweep_checks(results, cfg: ExperimentConfig, out) -> list[Check]:
    checks = []
    keys = sorted({(r.mode, r.width) for r in results}, key=lambda t: (t[0], t[1] or 0))
    for mode, width in keys:
        s = _series(results, mode, width)
        bad = [(a.ebn0_db, b.ebn0_db) for a, b in zip(s, s[1:])
               if b.ber > a.ber + 3 * _combined_se(a.ber_se, b.ber_se)]
        checks.append(Check(f"ber_monotone_{mode}_B{width or 'map'}", not bad, True,
                            f"violations at {bad}" if bad else "ok"))
    widths = sorted({r.width for r in results if r.width is not None})
    for B in widths:
        orc, seq = _series(results, "oracle", B), _series(results, "sequential", B)
        bad = [o.ebn0_db for o, q in zip(orc, seq)
               if o.ber > q.ber + 3 * _combined_se(o.ber_se, q.ber_se)]
        checks.append(Check(f"oracle_le_sequential_B{B}", not bad, True,
                            f"violations at {bad}" if bad else "ok"))
        mp = _series(results, "map_oracle", None)
        bad = []
        for o, m in zip(orc, mp):
            se = np.sqrt(o.per_bit_se ** 2 + m.per_bit_se ** 2)
            if np.any(o.per_bit_error < m.per_bit_error - 3 * se):
                bad.append(o.ebn0_db)
        checks.append(Check(f"onn_not_better_than_map_B{B}", not bad, False,
                            f"violations at {bad}" if bad else "ok"))
    if len(widths) >= 2:
        lo, hi = widths[0], widths[-1]
        code, _ = cfg.code()
        better = 0
        for i in code.message_set:
            v_lo = read_trace(trace_path(out, i, lo))["val_mse"][-1]
            v_hi = read_trace(trace_path(out, i, hi))["val_mse"][-1]
            better += bool(v_hi <= v_lo)
        need = math.ceil(0.75 * code.K)
        checks.append(Check(f"val_mse_B{hi}_le_B{lo}", better >= need, True,
                            f"{better}/{code.K} bits (need {need})"))
        eb = sorted(cfg.ebn0_db)
        mid = eb[len(eb) // 2 - 1: len(eb) // 2 + 1] if len(eb) > 2 else eb
        bad = []
        for mode in ("oracle", "sequential"):
            for a, b in zip(_series(results, mode, hi), _series(results, mode, lo)):
                if a.ebn0_db in mid and a.ber > b.ber + 3 * _combined_se(a.ber_se, b.ber_se):
                    bad.append((mode, a.ebn0_db))
        checks.append(Check(f"ber_B{hi}_le_B{lo}_mid_snr", not bad, False,
                            f"violations at {bad}" if bad else "ok"))
    return checks


def run_sweep(cfg: ExperimentConfig, out=None):
    out = Path(out or cfg.out_dir)
    banks = {B: load_bank(cfg, B, out) for B in cfg.widths}
    results = sweep_results(cfg, banks)
    code, _ = cfg.code()
    sp, cp = out / "sweep.csv", out / "checks_sweep.csv"
    if sp.exists():
        sp.unlink()
    append_eval_csv(sp, results, code)
    checks = sweep_checks(results, cfg, out)
    write_checks(cp, checks)
    man = RunManifest(out)
    run = man.begin("sweep", cfg)
    man.add_file(sp)
    man.add_file(cp)
    man.finish(run)
    return results, checks
