"""Experiment orchestration: sweeps, capacity runs, validation, persistence.

Configuration is a flat ``key = value`` text format with cosmetic section
headers (every key is globally unique, so sections only group related keys):

    # estimator sweep over SNR
    [experiment]
    kind = estimator-sweep
    estimators = ddime_hat, ddime_tilde:alpha=0.1, smile:tau=5
    snr_grid = -5, 0, 5, 10
    dim = 2
    repeats = 10
    eval_batches = 10000
    seed_base = 0
    out_dir = runs

    [train]
    iterations = 5000
    batch = 512
    lr = 0.002
    dropout = 0.3

    [capacity]
    latent = gaussian
    latent_dim = 30
    m = 8
    alpha = 1.0
    gen_iterations = 500
    disc_steps_per_gen = 10
    gen_lr = 0.0002
    disc_lr = 0.002

Per-estimator knobs use colon syntax (``name:alpha=0.1:tau=5``). Every key is
also reachable through CLI flags. Sweep cells may run in parallel worker
threads (capped by the ``CORTICAL_WORKERS`` environment variable); each cell
owns its RNG and model, rows are assembled in grid order afterwards, so
results are independent of the worker count.

Per-repeat seeds are ``seed_base + repeat_index``; capacity runs use
``seed_base + grid_index``. CSV is the source of truth, SVG plots are derived
from it and regenerable. The 8-PSK baseline is always computed by Monte-Carlo
integration at run time, never hardcoded.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

import cortical.estimators as estimators
from cortical import __version__
from cortical.capacity import (
    CorticalConfig,
    LatentConfig,
    cortical_train,
    export_constellation,
)
from cortical.channel import (
    LN2,
    ChannelConfig,
    GaussianSource,
    GaussianSourceConfig,
    awgn_capacity,
    gaussian_mi,
    snr_to_rho,
)
from cortical.estimators import (
    ESTIMATOR_NAMES,
    EstimatorKind,
    TrainConfig,
    discrete_mi_oracle,
    tabular_expectation_samples,
    train_estimator,
)

WORKERS_ENV = "CORTICAL_WORKERS"

SWEEP_COLUMNS = (
    "estimator", "alpha", "tau", "snr_db", "rho", "d", "seed", "repeat",
    "estimate_nats", "estimate_bits", "eval_std_nats", "truth_nats",
    "truth_bits", "iters", "batch", "wall_ms",
)

SUMMARY_COLUMNS = (
    "estimator", "alpha", "tau", "snr_db", "rho", "d", "repeats",
    "mean_estimate_nats", "mean_estimate_bits", "std_estimate_nats",
    "mean_eval_std_nats", "truth_nats", "truth_bits",
)

CAPACITY_COLUMNS = (
    "latent", "snr_db", "d", "seed", "tilde_nats", "tilde_bits", "hat_nats",
    "hat_bits", "tilde_std_nats", "reference_nats", "reference_bits",
    "psk8_nats", "psk8_bits", "gen_iters", "disc_steps", "batch", "wall_ms",
)

CONSTELLATION_COLUMNS = ("kind", "re", "im")


class HarnessError(Exception):
    """Invalid experiment configuration or orchestration failure."""


EXPERIMENT_KINDS = ("estimator-sweep", "capacity-run", "validate")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one reproducible experiment needs.

    ``snr_grid`` and ``rho_grid`` are mutually exclusive for sweeps; capacity
    runs use ``snr_grid`` only. Training-block fields mirror ``TrainConfig``;
    capacity-block fields mirror ``CorticalConfig``.
    """

    kind: str = "estimator-sweep"
    estimators: tuple = (EstimatorKind("ddime_hat"),)
    snr_grid: tuple = ()
    rho_grid: tuple = ()
    dim: int = 2
    repeats: int = 10
    eval_batches: int = 10000
    seed_base: int = 0
    out_dir: str = "runs"
    # training block
    iterations: int = 5000
    batch: int = 512
    lr: float = 0.002
    dropout: float = 0.3
    # capacity block
    latent: str = "gaussian"
    latent_dim: int = 30
    m: int = 8
    alpha: float = 1.0
    gen_iterations: int = 500
    disc_steps_per_gen: int = 10
    gen_lr: float = 0.0002
    disc_lr: float = 0.002

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise HarnessError(
                f"unknown experiment kind '{self.kind}', expected one of "
                f"{EXPERIMENT_KINDS}")
        if self.repeats < 1:
            raise HarnessError(f"repeats must be >= 1, got {self.repeats}")
        if self.kind == "estimator-sweep":
            if bool(self.snr_grid) == bool(self.rho_grid):
                raise HarnessError(
                    "estimator-sweep needs exactly one non-empty grid "
                    "(snr_grid or rho_grid)")
            if not self.estimators:
                raise HarnessError("estimator list must be non-empty")
        if self.kind == "capacity-run" and not self.snr_grid:
            raise HarnessError("capacity-run needs a non-empty snr_grid")
        if self.latent not in ("gaussian", "discrete"):
            raise HarnessError(f"latent must be gaussian or discrete, got "
                               f"'{self.latent}'")

    def grid_points(self):
        """(axis, value) pairs of the active sweep grid."""
        if self.snr_grid:
            return [("snr", float(v)) for v in self.snr_grid]
        return [("rho", float(v)) for v in self.rho_grid]


# ---------------------------------------------------------------------------
# config text format
# ---------------------------------------------------------------------------

_LIST_KEYS = {"snr_grid", "rho_grid"}
_INT_KEYS = {"dim", "repeats", "eval_batches", "seed_base", "iterations",
             "batch", "latent_dim", "m", "gen_iterations",
             "disc_steps_per_gen"}
_FLOAT_KEYS = {"lr", "dropout", "alpha", "gen_lr", "disc_lr"}
_STR_KEYS = {"kind", "out_dir", "latent"}


def parse_estimator_spec(token: str) -> EstimatorKind:
    """'name' or 'name:alpha=0.1:tau=5' -> EstimatorKind."""
    parts = [p.strip() for p in token.split(":")]
    name, kw = parts[0], {}
    for part in parts[1:]:
        if "=" not in part:
            raise HarnessError(f"bad estimator option '{part}' in '{token}'")
        key, _, val = part.partition("=")
        key = key.strip()
        if key not in ("alpha", "tau", "ema_rate"):
            raise HarnessError(f"unknown estimator option '{key}' in '{token}'")
        kw[key] = float(val)
    try:
        return EstimatorKind(name, **kw)
    except estimators.EstimatorError as exc:
        raise HarnessError(str(exc)) from exc


def parse_config(text: str) -> ExperimentConfig:
    """Parse the key=value format; unknown keys are errors."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line or (line.startswith("[") and line.endswith("]")):
            continue
        if "=" not in line:
            raise HarnessError(f"config line {lineno}: expected key = value, "
                               f"got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key == "estimators":
            values[key] = tuple(parse_estimator_spec(t)
                                for t in val.split(",") if t.strip())
        elif key in _LIST_KEYS:
            values[key] = tuple(float(t) for t in val.split(",") if t.strip())
        elif key in _INT_KEYS:
            values[key] = int(val)
        elif key in _FLOAT_KEYS:
            values[key] = float(val)
        elif key in _STR_KEYS:
            values[key] = val
        else:
            raise HarnessError(f"config line {lineno}: unknown key '{key}'")
    return ExperimentConfig(**values)


def render_config(cfg: ExperimentConfig) -> str:
    """Canonical text form of a config; parses back to an equal config."""
    ests = ", ".join(
        f"{k.name}:alpha={k.alpha!r}:tau={k.tau!r}" for k in cfg.estimators)
    lines = [
        "[experiment]",
        f"kind = {cfg.kind}",
        f"estimators = {ests}",
        "snr_grid = " + ", ".join(repr(float(v)) for v in cfg.snr_grid),
        "rho_grid = " + ", ".join(repr(float(v)) for v in cfg.rho_grid),
        f"dim = {cfg.dim}",
        f"repeats = {cfg.repeats}",
        f"eval_batches = {cfg.eval_batches}",
        f"seed_base = {cfg.seed_base}",
        f"out_dir = {cfg.out_dir}",
        "",
        "[train]",
        f"iterations = {cfg.iterations}",
        f"batch = {cfg.batch}",
        f"lr = {cfg.lr!r}",
        f"dropout = {cfg.dropout!r}",
        "",
        "[capacity]",
        f"latent = {cfg.latent}",
        f"latent_dim = {cfg.latent_dim}",
        f"m = {cfg.m}",
        f"alpha = {cfg.alpha!r}",
        f"gen_iterations = {cfg.gen_iterations}",
        f"disc_steps_per_gen = {cfg.disc_steps_per_gen}",
        f"gen_lr = {cfg.gen_lr!r}",
        f"disc_lr = {cfg.disc_lr!r}",
    ]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------


@dataclass
class RunManifest:
    """Record of one harness invocation: config, seeds, outputs, checksums."""

    kind: str
    config_text: str
    version: str = __version__
    seeds: list = field(default_factory=list)
    timings_ms: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def add_output(self, out_dir: str, name: str):
        self.outputs[name] = sha256_file(os.path.join(out_dir, name))

    def write(self, out_dir: str, name: str = "manifest.json") -> str:
        for fname in self.outputs:
            if not os.path.exists(os.path.join(out_dir, fname)):
                raise HarnessError(f"manifest lists missing output {fname!r}")
        path = os.path.join(out_dir, name)
        payload = {
            "kind": self.kind, "version": self.version,
            "config": self.config_text, "seeds": self.seeds,
            "timings_ms": self.timings_ms, "outputs": self.outputs,
            "failures": self.failures,
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def load_manifest(out_dir: str, name: str = "manifest.json") -> dict:
    with open(os.path.join(out_dir, name)) as fh:
        return json.load(fh)


def verify_manifest(out_dir: str, name: str = "manifest.json") -> list:
    """Mismatch descriptions for missing/corrupted outputs (empty = clean)."""
    data = load_manifest(out_dir, name)
    problems = []
    for fname, digest in data["outputs"].items():
        path = os.path.join(out_dir, fname)
        if not os.path.exists(path):
            problems.append(f"{fname}: listed in manifest but missing")
        elif sha256_file(path) != digest:
            problems.append(f"{fname}: checksum mismatch")
    return problems


def _write_csv(path: str, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(value) -> str:
    """Deterministic shortest round-trip text for one CSV cell."""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _worker_count(workers) -> int:
    if workers is not None:
        return max(1, int(workers))
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


# ---------------------------------------------------------------------------
# estimator sweep
# ---------------------------------------------------------------------------


def _rho_of_point(axis: str, value: float) -> float:
    return snr_to_rho(value) if axis == "snr" else value


def _snr_text(axis: str, value: float, rho: float) -> str:
    """snr_db cell: given for SNR sweeps, derived for rho sweeps where defined."""
    if axis == "snr":
        return _fmt(value)
    if 0.0 < rho < 1.0:
        return _fmt(-10.0 * math.log10(1.0 / (rho * rho) - 1.0))
    return ""


def _sweep_cell(cfg: ExperimentConfig, kind: EstimatorKind, axis: str,
                value: float, repeat: int):
    rho = _rho_of_point(axis, value)
    seed = cfg.seed_base + repeat
    source = GaussianSource(GaussianSourceConfig(cfg.dim, rho))
    tcfg = TrainConfig(iterations=cfg.iterations, batch=cfg.batch, lr=cfg.lr,
                       dropout=cfg.dropout, seed=seed,
                       eval_batches=cfg.eval_batches)
    start = time.perf_counter()
    _, trace = train_estimator(kind, source, cfg=tcfg)
    wall_ms = (time.perf_counter() - start) * 1000.0
    truth = gaussian_mi(cfg.dim, rho)
    row = (kind.name, _fmt(kind.alpha), _fmt(kind.tau),
           _snr_text(axis, value, rho), _fmt(rho), _fmt(cfg.dim), _fmt(seed),
           _fmt(repeat), _fmt(trace.estimate.nats), _fmt(trace.estimate.bits),
           _fmt(trace.eval_std_nats), _fmt(truth.nats), _fmt(truth.bits),
           _fmt(cfg.iterations), _fmt(cfg.batch), f"{wall_ms:.1f}")
    return row, seed


@dataclass
class SweepResult:
    data_path: str
    summary_path: str
    manifest_path: str
    failures: list

    @property
    def ok(self) -> bool:
        return not self.failures


def run_sweep(cfg: ExperimentConfig, workers=None) -> SweepResult:
    """Train/evaluate every (estimator, grid point, repeat) cell; write CSVs.

    A failed cell is recorded in the manifest and skipped; remaining cells
    still run. Data rows are ordered (estimator, grid point, repeat)
    regardless of worker scheduling.
    """
    if cfg.kind != "estimator-sweep":
        raise HarnessError(f"run_sweep needs an estimator-sweep config, "
                           f"got '{cfg.kind}'")
    os.makedirs(cfg.out_dir, exist_ok=True)
    cells = [(kind, axis, value, repeat)
             for kind in cfg.estimators
             for axis, value in cfg.grid_points()
             for repeat in range(cfg.repeats)]

    manifest = RunManifest(kind=cfg.kind, config_text=render_config(cfg))
    rows = [None] * len(cells)
    start = time.perf_counter()

    def run_one(idx_cell):
        idx, (kind, axis, value, repeat) = idx_cell
        try:
            rows[idx], seed = _sweep_cell(cfg, kind, axis, value, repeat)
            return idx, seed, None
        except Exception as exc:
            label = (f"estimator={kind.name} {axis}={value!r} repeat={repeat}")
            return idx, cfg.seed_base + repeat, f"{label}: {exc}"

    n_workers = _worker_count(workers)
    if n_workers == 1:
        results = [run_one(item) for item in enumerate(cells)]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(run_one, enumerate(cells)))
    for _, seed, failure in results:
        manifest.seeds.append(seed)
        if failure is not None:
            manifest.failures.append(failure)
    rows = [r for r in rows if r is not None]

    data_path = os.path.join(cfg.out_dir, "sweep.csv")
    _write_csv(data_path, SWEEP_COLUMNS, rows)
    summary_path = os.path.join(cfg.out_dir, "sweep_summary.csv")
    _write_csv(summary_path, SUMMARY_COLUMNS, summarize_rows(rows))
    manifest.timings_ms["total"] = (time.perf_counter() - start) * 1000.0
    manifest.add_output(cfg.out_dir, "sweep.csv")
    manifest.add_output(cfg.out_dir, "sweep_summary.csv")
    manifest_path = manifest.write(cfg.out_dir)
    return SweepResult(data_path, summary_path, manifest_path,
                       manifest.failures)


def summarize_rows(rows) -> list:
    """Aggregate sweep rows over repeats, preserving first-seen group order."""
    groups = {}
    for row in rows:
        key = (row[0], row[1], row[2], row[3], row[4], row[5])
        groups.setdefault(key, []).append(row)
    out = []
    for key, members in groups.items():
        nats = np.array([float(r[8]) for r in members])
        bits = np.array([float(r[9]) for r in members])
        stds = np.array([float(r[10]) for r in members])
        out.append(key[:6] + (_fmt(len(members)),
                              _fmt(nats.mean()), _fmt(bits.mean()),
                              _fmt(nats.std()), _fmt(stds.mean()),
                              members[0][11], members[0][12]))
    return out


# ---------------------------------------------------------------------------
# capacity runs
# ---------------------------------------------------------------------------


def psk_mi_monte_carlo(m: int, snr_db: float, draws: int = 2_000_000,
                       seed: int = 0, power: float = 1.0,
                       real_noise: bool = True) -> float:
    """MI in nats of uniform m-PSK over the AWGN channel, by Monte Carlo.

    The constellation sits on the circle of radius sqrt(2*power) (average
    per-dimension power = ``power``, matching the generator's normalization).
    The estimate is the sample mean of log(m) + log posterior of the sent
    symbol, chunked to bound memory.
    """
    if m < 2 or draws < 1:
        raise HarnessError(f"need m >= 2 and draws >= 1, got m={m}, "
                           f"draws={draws}")
    sigma2 = power * 10.0 ** (-snr_db / 10.0)
    var = sigma2 if real_noise else sigma2 / 2.0
    angles = 2.0 * np.pi * np.arange(m) / m
    const = np.sqrt(2.0 * power) * np.column_stack([np.cos(angles),
                                                    np.sin(angles)])
    rng = np.random.default_rng(seed)
    total, count = 0.0, 0
    while count < draws:
        n = min(100_000, draws - count)
        s = rng.integers(0, m, size=n)
        y = const[s] + np.sqrt(var) * rng.standard_normal((n, 2))
        d2 = ((y[:, None, :] - const[None, :, :]) ** 2).sum(axis=2)
        log_lik = -d2 / (2.0 * var)
        log_post = log_lik[np.arange(n), s] - logsumexp(log_lik, axis=1)
        total += float(np.sum(np.log(m) + log_post))
        count += n
    return total / draws


@dataclass
class CapacityResult:
    data_path: str
    constellation_path: str  # "" when the dimension is not 2
    manifest_path: str
    failures: list
    reports: list

    @property
    def ok(self) -> bool:
        return not self.failures


def _cortical_config(cfg: ExperimentConfig, snr_db: float,
                     seed: int) -> CorticalConfig:
    if cfg.latent == "gaussian":
        latent = LatentConfig.gaussian(cfg.latent_dim)
    else:
        latent = LatentConfig.discrete(cfg.m)
    return CorticalConfig(
        latent=latent,
        channel=ChannelConfig(dim=cfg.dim, snr_db=snr_db, real_noise=True),
        alpha=cfg.alpha, disc_steps_per_gen=cfg.disc_steps_per_gen,
        gen_iterations=cfg.gen_iterations, gen_lr=cfg.gen_lr,
        disc_lr=cfg.disc_lr, batch=cfg.batch, disc_dropout=cfg.dropout,
        eval_batches=cfg.eval_batches, seed=seed)


def run_capacity(cfg: ExperimentConfig, psk_draws: int = 2_000_000) -> CapacityResult:
    """One capacity-learning run per SNR; rows plus final-SNR constellation.

    Channels use the per-dimension noise convention so the reference column
    log2(1+SNR) is the exact dim=2 ceiling. Discrete-latent rows also carry
    the Monte-Carlo 8-PSK baseline; it is computed fresh on every run.
    """
    if cfg.kind != "capacity-run":
        raise HarnessError(f"run_capacity needs a capacity-run config, "
                           f"got '{cfg.kind}'")
    os.makedirs(cfg.out_dir, exist_ok=True)
    manifest = RunManifest(kind=cfg.kind, config_text=render_config(cfg))
    rows, reports = [], []
    last_gen, last_run_cfg = None, None
    start = time.perf_counter()
    for index, snr_db in enumerate(cfg.snr_grid):
        seed = cfg.seed_base + index
        manifest.seeds.append(seed)
        run_cfg = _cortical_config(cfg, float(snr_db), seed)
        t0 = time.perf_counter()
        try:
            gen, _, report = cortical_train(run_cfg)
        except Exception as exc:
            manifest.failures.append(f"snr={snr_db!r} seed={seed}: {exc}")
            continue
        wall_ms = (time.perf_counter() - t0) * 1000.0
        if cfg.latent == "discrete" and cfg.m == 8:
            psk = psk_mi_monte_carlo(8, float(snr_db), draws=psk_draws)
            psk_nats, psk_bits = _fmt(psk), _fmt(psk / LN2)
        else:
            psk_nats, psk_bits = "", ""
        rows.append((cfg.latent, _fmt(float(snr_db)), _fmt(cfg.dim),
                     _fmt(seed), _fmt(report.tilde.nats),
                     _fmt(report.tilde.bits), _fmt(report.hat.nats),
                     _fmt(report.hat.bits), _fmt(report.tilde_std_nats),
                     _fmt(report.reference.nats), _fmt(report.reference.bits),
                     psk_nats, psk_bits, _fmt(cfg.gen_iterations),
                     _fmt(cfg.disc_steps_per_gen), _fmt(cfg.batch),
                     f"{wall_ms:.1f}"))
        reports.append(report)
        last_gen, last_run_cfg = gen, run_cfg

    data_path = os.path.join(cfg.out_dir, "capacity.csv")
    _write_csv(data_path, CAPACITY_COLUMNS, rows)
    manifest.add_output(cfg.out_dir, "capacity.csv")

    constellation_path = ""
    if last_gen is not None and cfg.dim == 2:
        const = export_constellation(last_gen, last_run_cfg, n=512)
        constellation_path = os.path.join(cfg.out_dir, "constellation.csv")
        _write_csv(constellation_path, CONSTELLATION_COLUMNS,
                   [(kind, _fmt(re), _fmt(im)) for kind, re, im in const.rows()])
        manifest.add_output(cfg.out_dir, "constellation.csv")
    manifest.timings_ms["total"] = (time.perf_counter() - start) * 1000.0
    manifest_path = manifest.write(cfg.out_dir)
    return CapacityResult(data_path, constellation_path, manifest_path,
                          manifest.failures, reports)


# ---------------------------------------------------------------------------
# validation suite
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.error <= self.tolerance

    def line(self) -> str:
        flag = "pass" if self.passed else "FAIL"
        return f"[{flag}] {self.name}: error {self.error:.3e} vs tolerance " \
               f"{self.tolerance:.1e}"


@dataclass
class ValidationReport:
    checks: list

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list:
        out = [c.line() for c in self.checks]
        n_fail = sum(not c.passed for c in self.checks)
        out.append(f"{len(self.checks) - n_fail}/{len(self.checks)} checks "
                   f"passed")
        return out


VALIDATION_JOINTS = {
    "independent": np.full((2, 2), 0.25),
    "bsc(0.1)": np.array([[0.45, 0.05], [0.05, 0.45]]),
    "correlated": np.diag([0.5, 0.5]),
}

PLUGIN_ESTIMATORS = ("idime", "ddime_hat", "ddime_tilde", "mine", "nwj",
                     "smile")


def plugin_estimate(name: str, oracle, alpha: float = 1.0,
                    tau: float = 1e6) -> float:
    """Exact-expectation readout of an estimator at its optimal discriminator.

    Cell values are replicated in proportion to exact cell probabilities, so
    sample means ARE expectations and the readout must equal the oracle MI.
    """
    if name not in PLUGIN_ESTIMATORS:
        raise HarnessError(f"no plug-in route for estimator '{name}'")
    prod = np.outer(oracle.px, oracle.py)
    with np.errstate(divide="ignore"):
        log_r = np.log(oracle.r_star)  # -inf off the joint support
    if name == "idime":
        dj = tabular_expectation_samples(oracle.joint, oracle.d_star)
        return estimators.idime_estimate_from_probs(dj)
    if name == "ddime_hat":
        dj = tabular_expectation_samples(oracle.joint, alpha * oracle.r_star)
        return estimators.ddime_hat(dj, alpha)
    if name == "ddime_tilde":
        dj = tabular_expectation_samples(oracle.joint, alpha * oracle.r_star)
        dm = tabular_expectation_samples(prod, alpha * oracle.r_star)
        j_alpha = estimators.ddime_value(dj, dm, alpha)
        return estimators.ddime_tilde(j_alpha, alpha)
    tj = tabular_expectation_samples(oracle.joint, log_r)
    if name == "mine":
        tm = tabular_expectation_samples(prod, log_r)
        return estimators.mine_value(tj, tm)
    if name == "nwj":
        tm = tabular_expectation_samples(prod, 1.0 + log_r)
        return estimators.nwj_estimate(1.0 + tj, tm)
    tm = tabular_expectation_samples(prod, log_r)
    return estimators.smile_estimate(tj, tm, tau)


def _gradient_checks() -> list:
    rng_batch = GaussianSource(GaussianSourceConfig(2, 0.6)).sample(
        16, np.random.default_rng(0))
    kinds = [EstimatorKind("idime"),
             EstimatorKind("ddime_tilde", alpha=0.1),
             EstimatorKind("ddime_tilde", alpha=1.0),
             EstimatorKind("ddime_tilde", alpha=10.0),
             EstimatorKind("mine"), EstimatorKind("nwj"),
             EstimatorKind("smile"), EstimatorKind("infonce")]
    out = []
    for kind in kinds:
        err = estimators.loss_grad_check(kind, rng_batch, d=2)
        label = kind.name if kind.name != "ddime_tilde" \
            else f"ddime(alpha={kind.alpha})"
        out.append(CheckResult(f"grad {label}", err, 1e-4))
    return out


def _plugin_checks() -> list:
    out = []
    for joint_name, joint in VALIDATION_JOINTS.items():
        oracle = discrete_mi_oracle(joint)
        for name in PLUGIN_ESTIMATORS:
            err = abs(plugin_estimate(name, oracle) - oracle.mi.nats)
            out.append(CheckResult(f"plug-in {name} on {joint_name}", err,
                                   1e-9))
    return out


def _bound_direction_check() -> CheckResult:
    oracle = discrete_mi_oracle(VALIDATION_JOINTS["bsc(0.1)"])
    prod = np.outer(oracle.px, oracle.py)
    rng = np.random.default_rng(7)
    worst = -np.inf
    for _ in range(200):
        critic = np.exp(rng.uniform(-2.0, 2.0, size=(2, 2)))
        dj = tabular_expectation_samples(oracle.joint, critic)
        dm = tabular_expectation_samples(prod, critic)
        tilde = estimators.ddime_tilde(estimators.ddime_value(dj, dm, 1.0), 1.0)
        worst = max(worst, tilde - oracle.mi.nats)
    return CheckResult("bound direction (200 critics, bsc(0.1))",
                       max(worst, 0.0), 1e-9)


def _identity_checks() -> list:
    rng = np.random.default_rng(11)
    tj, tm = rng.normal(size=256), rng.normal(size=256)
    tilde = estimators.ddime_tilde(
        estimators.ddime_value(np.exp(tj - 1), np.exp(tm - 1), 1.0), 1.0)
    nwj_err = abs(tilde - estimators.nwj_estimate(tj, tm))
    smile_err = abs(estimators.smile_estimate(3 * tj, 3 * tm, 1e6)
                    - estimators.mine_value(3 * tj, 3 * tm))
    pre = rng.uniform(-8, 8, size=256)
    probs = 1.0 / (1.0 + np.exp(-pre))
    idime_err = abs(estimators.idime_estimate(pre)
                    - estimators.idime_estimate_from_probs(probs))
    return [CheckResult("identity nwj = ddime_tilde(alpha=1)", nwj_err, 1e-12),
            CheckResult("identity smile(tau=1e6) = mine", smile_err, 1e-9),
            CheckResult("identity idime logit = probability path", idime_err,
                        1e-9)]


def _consistency_triangle_check() -> CheckResult:
    worst = 0.0
    for snr_db in np.linspace(-20.0, 25.0, 91):
        bits = gaussian_mi(2, snr_to_rho(snr_db)).bits
        worst = max(worst, abs(bits - awgn_capacity(snr_db)))
    return CheckResult("consistency gaussian_mi vs awgn_capacity", worst,
                       1e-12)


def run_validate() -> ValidationReport:
    """Oracle/property checks across the package; all must pass on a fresh
    checkout. Each check reports its measured error against its tolerance."""
    checks = _gradient_checks() + _plugin_checks()
    checks.append(_bound_direction_check())
    checks.extend(_identity_checks())
    checks.append(_consistency_triangle_check())
    return ValidationReport(checks)
