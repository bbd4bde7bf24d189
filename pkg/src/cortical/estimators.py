"""Discriminative mutual-information estimators and their training loop.

Seven estimators share one discriminator shape (concatenated (x, y) rows in,
one critic value out) and differ in head and objective:

==============  ========  =====================================================
estimator       head      objective ascended / readout
==============  ========  =====================================================
idime           sigmoid   E[log D(x,y')] + E[log(1 - D(x,y))]; MI read as
                          E[-pre_activation] on joint samples
ddime_hat       softplus  J_a = a E[log D(x,y)] - E[D(x,y')]; MI read as
                          E[log(D/a)] on joint samples
ddime_tilde     softplus  same J_a; MI read as J_a/a + 1 - log a (lower bound)
mine            linear    E[T] - log E'[e^T], EMA-corrected partition gradient
nwj             linear    E[T] - E'[e^(T-1)]
smile           linear    E[T] - log E'[clip(e^T, e^-tau, e^tau)]
infonce         linear    mean_i log( e^T(i,i) / mean_j e^T(i,j) )
==============  ========  =====================================================

E is the joint expectation, E' the product-of-marginals expectation realized
by derangement. Everything is in nats internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import logsumexp

from cortical.autodiff import Tape
from cortical.channel import MiValue, SampleBatch, mi_from_nats
from cortical.nn import (
    AdamState,
    MlpSpec,
    NetParams,
    adam_step,
    discriminator_spec,
    mlp_forward,
    mlp_init,
    watch_params,
)

ESTIMATOR_NAMES = (
    "idime", "ddime_hat", "ddime_tilde", "mine", "nwj", "smile", "infonce",
)

_HEAD_FOR = {
    "idime": "sigmoid",
    "ddime_hat": "softplus",
    "ddime_tilde": "softplus",
    "mine": "linear",
    "nwj": "linear",
    "smile": "linear",
    "infonce": "linear",
}

LOG_FLOOR = 1e-12


class EstimatorError(Exception):
    """Invalid estimator configuration or out-of-domain input."""


class TrainingDiverged(EstimatorError):
    """A training step produced a non-finite objective or gradient."""


@dataclass(frozen=True)
class EstimatorKind:
    """Which bound is optimized, with its knobs.

    ``alpha`` scales the d-DIME value function, ``tau`` clips SMILE's
    partition term, ``ema_rate`` is the weight of the current batch in MINE's
    moving-average partition (1.0 reproduces the raw biased gradient).
    """

    name: str
    alpha: float = 1.0
    tau: float = 1.0
    ema_rate: float = 0.99

    def __post_init__(self):
        if self.name not in ESTIMATOR_NAMES:
            raise EstimatorError(
                f"unknown estimator '{self.name}', expected one of {ESTIMATOR_NAMES}")
        if self.alpha <= 0:
            raise EstimatorError(f"alpha must be positive, got {self.alpha}")
        if self.tau <= 0:
            raise EstimatorError(f"tau must be positive, got {self.tau}")
        if not 0.0 < self.ema_rate <= 1.0:
            raise EstimatorError(f"ema_rate must lie in (0, 1], got {self.ema_rate}")

    @property
    def head(self) -> str:
        return _HEAD_FOR[self.name]


@dataclass(frozen=True)
class TrainConfig:
    """Discriminator training schedule."""

    iterations: int = 5000
    batch: int = 512
    lr: float = 0.002
    beta1: float = 0.5
    beta2: float = 0.999
    dropout: float = 0.3
    seed: int = 0
    eval_batches: int = 500

    def __post_init__(self):
        if self.iterations < 1:
            raise EstimatorError(f"iterations must be >= 1, got {self.iterations}")
        if self.batch < 2:
            raise EstimatorError(f"batch must be >= 2, got {self.batch}")
        if self.lr <= 0:
            raise EstimatorError(f"lr must be positive, got {self.lr}")
        if self.eval_batches < 1:
            raise EstimatorError(f"eval_batches must be >= 1, got {self.eval_batches}")


@dataclass
class EstimateTrace:
    """Per-iteration objective readings plus the final evaluated estimate."""

    kind: str
    values: np.ndarray
    estimate: MiValue
    eval_std_nats: float
    eval_batches: int

    @property
    def final_nats(self) -> float:
        return self.estimate.nats

    @property
    def final_bits(self) -> float:
        return self.estimate.bits


# ---------------------------------------------------------------------------
# value functions and readouts (plain numpy, evaluation side)
# ---------------------------------------------------------------------------


def _as_vec(x, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise EstimatorError(f"{name}: empty input")
    return v


def idime_value(d_joint, d_marg) -> float:
    """GAN-style value: mean(log D_marg) + mean(log(1 - D_joint))."""
    dj = _as_vec(d_joint, "idime_value")
    dm = _as_vec(d_marg, "idime_value")
    if ((dj <= 0) | (dj >= 1)).any() or ((dm <= 0) | (dm >= 1)).any():
        raise EstimatorError("idime_value: discriminator outputs must lie in (0,1)")
    return float(np.mean(np.log(dm)) + np.mean(np.log1p(-dj)))


def idime_estimate(pre_activation_joint) -> float:
    """MI in nats from the sigmoid head's pre-activations on joint samples.

    Equals mean(log((1-D)/D)) but never touches the saturating probabilities.
    """
    pre = _as_vec(pre_activation_joint, "idime_estimate")
    if not np.isfinite(pre).all():
        raise EstimatorError("idime_estimate: non-finite pre-activations")
    return float(-np.mean(pre))


def idime_estimate_from_probs(d_joint) -> float:
    """Probability-path counterpart of ``idime_estimate``, for identity checks."""
    dj = _as_vec(d_joint, "idime_estimate_from_probs")
    if ((dj <= 0) | (dj >= 1)).any():
        raise EstimatorError("idime_estimate_from_probs: outputs must lie in (0,1)")
    return float(np.mean(np.log((1.0 - dj) / dj)))


def ddime_value(d_joint, d_marg, alpha: float) -> float:
    """J_alpha = alpha * mean(log D_joint) - mean(D_marg)."""
    dj = _as_vec(d_joint, "ddime_value")
    dm = _as_vec(d_marg, "ddime_value")
    if alpha <= 0:
        raise EstimatorError(f"ddime_value: alpha must be positive, got {alpha}")
    if (dj <= 0).any():
        raise EstimatorError("ddime_value: joint-side outputs must be positive")
    if (dm < 0).any():
        raise EstimatorError("ddime_value: marginal-side outputs must be nonnegative")
    return float(alpha * np.mean(np.log(dj)) - np.mean(dm))


def ddime_hat(d_joint, alpha: float) -> float:
    """MI in nats as mean(log(D/alpha)) over joint samples only."""
    dj = _as_vec(d_joint, "ddime_hat")
    if alpha <= 0:
        raise EstimatorError(f"ddime_hat: alpha must be positive, got {alpha}")
    if (dj <= 0).any():
        raise EstimatorError("ddime_hat: outputs must be positive")
    return float(np.mean(np.log(dj / alpha)))


def ddime_tilde(j_alpha_value: float, alpha: float) -> float:
    """MI in nats as J_alpha/alpha + 1 - log(alpha); a lower bound in expectation."""
    if alpha <= 0:
        raise EstimatorError(f"ddime_tilde: alpha must be positive, got {alpha}")
    return float(j_alpha_value / alpha + 1.0 - np.log(alpha))


def mine_value(t_joint, t_marg) -> float:
    """mean(T_joint) - log(mean(exp(T_marg))), via log-sum-exp."""
    tj = _as_vec(t_joint, "mine_value")
    tm = _as_vec(t_marg, "mine_value")
    return float(np.mean(tj) - (logsumexp(tm) - np.log(tm.size)))


def nwj_estimate(t_joint, t_marg) -> float:
    """mean(T_joint) - mean(exp(T_marg - 1))."""
    tj = _as_vec(t_joint, "nwj_estimate")
    tm = _as_vec(t_marg, "nwj_estimate")
    shifted = tm - 1.0
    if (shifted > 700.0).any():
        raise EstimatorError("nwj_estimate: exp overflow; critic values too large")
    return float(np.mean(tj) - np.mean(np.exp(shifted)))


def smile_estimate(t_joint, t_marg, tau: float) -> float:
    """mean(T_joint) - log(mean(clip(exp(T_marg), e^-tau, e^tau))).

    Computed in log space: clipping exp(T) to [e^-tau, e^tau] is the same as
    clipping T to [-tau, tau] before exponentiation, which never overflows.
    """
    if tau <= 0:
        raise EstimatorError(f"smile_estimate: tau must be positive, got {tau}")
    tj = _as_vec(t_joint, "smile_estimate")
    tm = _as_vec(t_marg, "smile_estimate")
    clipped = np.clip(tm, -tau, tau)
    return float(np.mean(tj) - (logsumexp(clipped) - np.log(tm.size)))


def infonce_estimate(score_matrix) -> float:
    """mean_i [ T(i,i) - log mean_j exp(T(i,j)) ], log-sum-exp stabilized."""
    s = np.asarray(score_matrix, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] < 2:
        raise EstimatorError(f"infonce_estimate: need a square N>=2 matrix, got {s.shape}")
    n = s.shape[0]
    denom = logsumexp(s, axis=1) - np.log(n)
    return float(np.mean(np.diagonal(s) - denom))


def fenchel_conjugate(t: float, alpha: float) -> float:
    """Convex conjugate of f(u) = -alpha*log(u): f*(t) = -alpha - alpha*log(-t/alpha).

    For t >= 0 the supremum sup_u {u*t + alpha*log u} diverges; +inf is
    returned as the out-of-domain value.
    """
    if alpha <= 0:
        raise EstimatorError(f"fenchel_conjugate: alpha must be positive, got {alpha}")
    if t >= 0:
        return math.inf
    return float(-alpha - alpha * np.log(-t / alpha))


# ---------------------------------------------------------------------------
# discrete oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteOracle:
    """Exact MI and optimal-discriminator tables for a finite joint."""

    joint: np.ndarray
    px: np.ndarray
    py: np.ndarray
    mi: MiValue
    r_star: np.ndarray  # density ratio p(x,y) / (p(x) p(y)); d-DIME optimum is alpha * r_star
    d_star: np.ndarray  # i-DIME optimum p(x)p(y) / (p(x,y) + p(x)p(y))


def discrete_mi_oracle(joint) -> DiscreteOracle:
    """Enumerate a finite joint table: exact MI plus D*/R* tables.

    The table must be nonnegative and sum to 1 within 1e-12.
    """
    p = np.asarray(joint, dtype=np.float64)
    if p.ndim != 2:
        raise EstimatorError(f"discrete_mi_oracle: need a 2-d table, got shape {p.shape}")
    if (p < 0).any():
        raise EstimatorError("discrete_mi_oracle: negative probabilities")
    if abs(p.sum() - 1.0) > 1e-12:
        raise EstimatorError(
            f"discrete_mi_oracle: table sums to {p.sum():.17g}, not 1")
    px = p.sum(axis=1)
    py = p.sum(axis=0)
    prod = np.outer(px, py)
    support = p > 0
    mi_nats = float(np.sum(p[support] * np.log(p[support] / prod[support])))
    with np.errstate(divide="ignore", invalid="ignore"):
        r_star = np.where(prod > 0, p / np.where(prod > 0, prod, 1.0), 0.0)
        d_star = np.where(p + prod > 0, prod / np.where(p + prod > 0, p + prod, 1.0), 0.5)
    return DiscreteOracle(joint=p, px=px, py=py, mi=mi_from_nats(mi_nats),
                          r_star=r_star, d_star=d_star)


def tabular_expectation_samples(prob_table, value_table,
                                max_denominator: int = 10**6) -> np.ndarray:
    """Replicate per-cell values so a plain mean is the exact expectation.

    Every probability must be rational with denominator <= max_denominator
    (true for the tables used in validation); cells are repeated
    proportionally to their probability, so mean(result) equals
    sum(p * v) exactly, letting sample-mean estimators be evaluated at exact
    expectations.
    """
    p = np.asarray(prob_table, dtype=np.float64).reshape(-1)
    v = np.asarray(value_table, dtype=np.float64).reshape(-1)
    if p.shape != v.shape:
        raise EstimatorError("tabular_expectation_samples: table shapes differ")
    fracs = [Fraction(x).limit_denominator(max_denominator) for x in p]
    for x, f in zip(p, fracs):
        if abs(float(f) - x) > 1e-15:
            raise EstimatorError(
                f"tabular_expectation_samples: probability {x!r} is not an exact "
                f"rational with denominator <= {max_denominator}")
    if sum(fracs) != 1:
        raise EstimatorError("tabular_expectation_samples: probabilities do not sum to 1")
    denom = math.lcm(*(f.denominator for f in fracs))
    if denom > max_denominator:
        raise EstimatorError(
            f"tabular_expectation_samples: common denominator {denom} too large")
    counts = [int(f * denom) for f in fracs]
    return np.repeat(v, counts)


# ---------------------------------------------------------------------------
# training objectives (tape side)
# ---------------------------------------------------------------------------


def _forward_pair(tape, leaves, spec, batch, mode, rng):
    """Two discriminator passes: joint rows [x,y] and marginal rows [x,y_perm]."""
    joint_in = tape.constant(np.hstack([batch.x, batch.y]))
    marg_in = tape.constant(np.hstack([batch.x, batch.y_perm]))
    out_j, pre_j = mlp_forward(tape, leaves, spec, joint_in, mode, rng)
    out_m, pre_m = mlp_forward(tape, leaves, spec, marg_in, mode, rng)
    return out_j, pre_j, out_m, pre_m


def _forward_scores(tape, leaves, spec, batch, mode, rng):
    """All-pairs critic matrix: row i holds T(x_i, y_j) for every j."""
    n = batch.x.shape[0]
    tiled = np.hstack([np.repeat(batch.x, n, axis=0), np.tile(batch.y, (n, 1))])
    out, _ = mlp_forward(tape, leaves, spec, tape.constant(tiled), mode, rng)
    return tape.reshape(out, (n, n))


def build_objective(tape, kind: EstimatorKind, leaves, spec: MlpSpec,
                    batch: SampleBatch, mode: str = "train", rng=None):
    """Build the kind's value function (to be ascended) on ``tape``.

    Returns (objective tensor, info dict with the scalar reading). For MINE
    this is the raw log-partition form, whose tape gradient equals the
    ema_rate = 1.0 limit; the training step swaps in the EMA-corrected
    surrogate built from the same forward tensors.
    """
    if kind.name == "infonce":
        scores = _forward_scores(tape, leaves, spec, batch, mode, rng)
        obj = tape.sub(tape.mean(tape.take_diag(scores)),
                       tape.mean(tape.row_logmeanexp(scores)))
        return obj, {"value": obj.item()}

    out_j, pre_j, out_m, pre_m = _forward_pair(tape, leaves, spec, batch, mode, rng)

    if kind.name == "idime":
        # mean(log D_marg) + mean(log(1 - D_joint)) in softplus form
        log_dm = tape.scale(tape.softplus(tape.scale(pre_m, -1.0)), -1.0)
        log_1mdj = tape.scale(tape.softplus(pre_j), -1.0)
        obj = tape.add(tape.mean(log_dm), tape.mean(log_1mdj))
        return obj, {"value": obj.item()}

    if kind.name in ("ddime_hat", "ddime_tilde"):
        obj = tape.sub(tape.scale(tape.mean(tape.log(out_j)), kind.alpha),
                       tape.mean(out_m))
        return obj, {"value": obj.item()}

    if kind.name == "mine":
        obj = tape.sub(tape.mean(pre_j), tape.log(tape.mean(tape.exp(pre_m))))
        return obj, {"value": obj.item()}

    if kind.name == "nwj":
        obj = tape.sub(tape.mean(pre_j),
                       tape.mean(tape.exp(tape.affine(pre_m, 1.0, -1.0))))
        return obj, {"value": obj.item()}

    if kind.name == "smile":
        clipped = tape.clip(pre_m, -kind.tau, kind.tau)
        obj = tape.sub(tape.mean(pre_j),
                       tape.log(tape.mean(tape.exp(clipped))))
        return obj, {"value": obj.item()}

    raise EstimatorError(f"no objective for kind '{kind.name}'")


def loss_grad_check(kind: EstimatorKind, batch: SampleBatch, d: int,
                    hidden=(8, 8), init_seed: int = 0, step: float = 1e-5) -> float:
    """Finite-difference check of one estimator objective's gradients.

    Builds the kind's objective on the fixed ``batch`` through a small
    freshly initialized discriminator (dropout disabled so the function is
    deterministic) and returns grad_check's max relative error over all
    parameters.
    """
    from cortical.autodiff import grad_check

    spec = MlpSpec(2 * d, tuple(hidden), 1, kind.head)
    init = mlp_init(spec, init_seed)

    def fn(tape, leaves):
        obj, _ = build_objective(tape, kind, leaves, spec, batch, mode="eval")
        return obj

    return grad_check(fn, init.flat(), step=step)


# ---------------------------------------------------------------------------
# training and evaluation
# ---------------------------------------------------------------------------


def training_streams(seed: int):
    """The three RNG lanes of one training run: (init, batches, eval).

    Shared with the capacity module so its discriminator phase consumes
    randomness exactly like a standalone training run.
    """
    return np.random.SeedSequence([int(seed)]).spawn(3)


def train_estimator(kind: EstimatorKind, source, disc_spec: MlpSpec | None = None,
                    cfg: TrainConfig = TrainConfig()):
    """Adam-ascend the kind's objective over fresh batches; returns (params, trace).

    ``source`` provides ``dim`` and ``sample(n, rng) -> SampleBatch``. When
    ``disc_spec`` is omitted, the standard two-layer width-100 discriminator
    with the config's dropout rate is used. The trace holds one objective
    reading per iteration; the final estimate and its spread come from
    ``cfg.eval_batches`` instantaneous eval-mode readouts.
    """
    if disc_spec is None:
        disc_spec = discriminator_spec(source.dim, kind.head, cfg.dropout)
    if disc_spec.head != kind.head:
        raise EstimatorError(
            f"estimator '{kind.name}' needs head '{kind.head}', "
            f"spec has '{disc_spec.head}'")
    if disc_spec.input_dim != 2 * source.dim:
        raise EstimatorError(
            f"discriminator input_dim {disc_spec.input_dim} does not match "
            f"2 x source dim {source.dim}")

    init_ss, batch_ss, eval_ss = training_streams(cfg.seed)
    params = mlp_init(disc_spec, init_ss)
    state = AdamState.for_params(params)
    batch_rng = np.random.default_rng(batch_ss)

    values = np.empty(cfg.iterations)
    mine_ema = None
    for i in range(cfg.iterations):
        batch = source.sample(cfg.batch, batch_rng)
        mine_ema, value = _ascend_step(
            kind, params, disc_spec, state, batch, batch_rng, cfg, mine_ema, i)
        values[i] = value

    mean, std = evaluate_estimator(
        params, kind, source, cfg.eval_batches, cfg.batch,
        disc_spec=disc_spec, rng=np.random.default_rng(eval_ss))
    trace = EstimateTrace(kind=kind.name, values=values,
                          estimate=mi_from_nats(mean), eval_std_nats=std,
                          eval_batches=cfg.eval_batches)
    return params, trace


def _ascend_step(kind, params, spec, state, batch, rng, cfg, mine_ema, iteration):
    """One maximize step; returns (updated mine_ema, objective reading)."""
    tape = Tape()
    leaves = watch_params(tape, params)
    try:
        if kind.name == "mine":
            obj, value, mine_ema = _mine_surrogate(
                tape, kind, leaves, spec, batch, rng, mine_ema)
        else:
            obj, info = build_objective(tape, kind, leaves, spec, batch,
                                        mode="train", rng=rng)
            value = info["value"]
        grads = tape.backward(obj)
        neg = [-grads[t] for t in leaves]
        adam_step(params, neg, state, cfg.lr, cfg.beta1, cfg.beta2)
    except (TrainingDiverged, EstimatorError):
        raise
    except Exception as exc:
        raise TrainingDiverged(
            f"{kind.name}: training step failed at iteration {iteration}: {exc}"
        ) from exc
    return mine_ema, value


def _mine_surrogate(tape, kind, leaves, spec, batch, rng, mine_ema):
    """EMA-corrected MINE step: gradient of the log-partition term is rescaled
    by (batch mean of exp T) / (moving average of that mean).

    Update-then-divide: the current batch enters the moving average before the
    surrogate is built, so ema_rate = 1.0 degenerates to the raw biased
    gradient of the value function itself. The returned reading is always the
    true value function.
    """
    out_j, pre_j, out_m, pre_m = _forward_pair(
        tape, leaves, spec, batch, "train", rng)
    exp_m = tape.mean(tape.exp(pre_m))
    partition = exp_m.item()
    mine_ema = partition if mine_ema is None else (
        (1.0 - kind.ema_rate) * mine_ema + kind.ema_rate * partition)
    obj = tape.sub(tape.mean(pre_j), tape.scale(exp_m, 1.0 / mine_ema))
    return obj, mine_value(pre_j.data, pre_m.data), mine_ema


def eval_outputs(params: NetParams, spec: MlpSpec, batch: SampleBatch):
    """Eval-mode discriminator outputs: (out_joint, pre_joint, out_marg, pre_marg)."""
    tape = Tape()
    out_j, pre_j = mlp_forward(
        tape, params, spec, tape.constant(np.hstack([batch.x, batch.y])))
    out_m, pre_m = mlp_forward(
        tape, params, spec, tape.constant(np.hstack([batch.x, batch.y_perm])))
    return (out_j.data.reshape(-1), pre_j.data.reshape(-1),
            out_m.data.reshape(-1), pre_m.data.reshape(-1))


def instantaneous_estimate(params: NetParams, spec: MlpSpec, kind: EstimatorKind,
                           batch: SampleBatch) -> float:
    """One batch's MI estimate in nats, eval mode."""
    if kind.name == "infonce":
        tape = Tape()
        scores = _forward_scores(tape, params, spec, batch, "eval", None)
        return infonce_estimate(scores.data)
    dj, pj, dm, pm = eval_outputs(params, spec, batch)
    if kind.name == "idime":
        return idime_estimate(pj)
    if kind.name == "ddime_hat":
        return ddime_hat(np.maximum(dj, LOG_FLOOR), kind.alpha)
    if kind.name == "ddime_tilde":
        j = ddime_value(np.maximum(dj, LOG_FLOOR), dm, kind.alpha)
        return ddime_tilde(j, kind.alpha)
    if kind.name == "mine":
        return mine_value(pj, pm)
    if kind.name == "nwj":
        return nwj_estimate(pj, pm)
    if kind.name == "smile":
        return smile_estimate(pj, pm, kind.tau)
    raise EstimatorError(f"no estimate for kind '{kind.name}'")


def evaluate_estimator(params: NetParams, kind: EstimatorKind, source,
                       batches: int, n: int, disc_spec: MlpSpec | None = None,
                       rng=None):
    """Mean and stddev of instantaneous estimates over fresh eval batches."""
    if disc_spec is None:
        disc_spec = discriminator_spec(source.dim, kind.head)
    if batches < 1:
        raise EstimatorError(f"batches must be >= 1, got {batches}")
    if rng is None:
        rng = np.random.default_rng(0)
    vals = np.empty(batches)
    for b in range(batches):
        vals[b] = instantaneous_estimate(params, disc_spec, kind, source.sample(n, rng))
    return float(vals.mean()), float(vals.std())
