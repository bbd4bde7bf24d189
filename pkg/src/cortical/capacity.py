"""Cooperative channel-capacity learning.

A generator (encoder) and a d-DIME discriminator maximize the same value
function J_alpha in alternation: k discriminator ascent steps with the
generator frozen, then one generator ascent step with the discriminator
frozen. The generator output is power-normalized before entering the AWGN
channel, so the learned input distribution always satisfies the power
constraint, and the discriminator's mutual-information readout converges
toward the channel capacity.

Readouts use the same two forms as the estimators module: tilde
(J_alpha/alpha + 1 - log alpha, the primary figure) and hat
(mean log(D/alpha) on joint samples, a cross-check).

The closed-form reference log2(1+SNR) matches a dim=2 channel carrying one
complex symbol as two real dimensions with per-dimension noise variance
sigma^2 (``ChannelConfig(real_noise=True)``); capacity runs use that
convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cortical.autodiff import Tape
from cortical.channel import (
    ChannelConfig,
    MiValue,
    SampleBatch,
    awgn_apply,
    awgn_capacity,
    derange,
    mi_from_bits,
    mi_from_nats,
)
from cortical.estimators import (
    LOG_FLOOR,
    EstimatorKind,
    TrainConfig,
    TrainingDiverged,
    _ascend_step,
    ddime_hat,
    ddime_tilde,
    ddime_value,
    eval_outputs,
    training_streams,
)
from cortical.nn import (
    AdamState,
    MlpSpec,
    NetParams,
    adam_step,
    discriminator_spec,
    generator_spec,
    mlp_forward,
    mlp_init,
    watch_params,
)


class CorticalError(Exception):
    """Invalid capacity-learning configuration or constraint violation."""


@dataclass(frozen=True)
class LatentConfig:
    """Generator input distribution.

    gaussian: ``dim`` i.i.d. standard normal entries per row. discrete: a
    uniform message s in {0, ..., m-1} encoded as its base-2 bit pattern, so
    the latent width is log2(m) with entries in {0, 1}.
    """

    kind: str
    dim: int = 0
    m: int = 0

    def __post_init__(self):
        if self.kind == "gaussian":
            if self.dim < 1:
                raise CorticalError(f"gaussian latent needs dim >= 1, got {self.dim}")
        elif self.kind == "discrete":
            if self.m < 2 or self.m & (self.m - 1):
                raise CorticalError(
                    f"discrete latent needs m a power of 2, m >= 2, got {self.m}")
        else:
            raise CorticalError(f"unknown latent kind '{self.kind}'")

    @classmethod
    def gaussian(cls, dim: int) -> "LatentConfig":
        return cls("gaussian", dim=dim)

    @classmethod
    def discrete(cls, m: int) -> "LatentConfig":
        return cls("discrete", m=m)

    @property
    def width(self) -> int:
        """Number of generator input columns."""
        if self.kind == "gaussian":
            return self.dim
        return self.m.bit_length() - 1


def latent_sample(cfg: LatentConfig, n: int, rng) -> np.ndarray:
    """N x width latent batch; discrete rows are bit patterns, high bit first."""
    if n < 2:
        raise CorticalError(f"latent batch needs n >= 2, got {n}")
    if cfg.kind == "gaussian":
        return rng.standard_normal((n, cfg.dim))
    s = rng.integers(0, cfg.m, size=n)
    shifts = np.arange(cfg.width - 1, -1, -1)
    return ((s[:, None] >> shifts[None, :]) & 1).astype(np.float64)


@dataclass(frozen=True)
class CorticalConfig:
    """Alternating-schedule hyperparameters.

    ``disc_steps_per_gen`` (k) discriminator updates run before each
    generator update, so the total discriminator iteration count is
    k * gen_iterations. ``gen_lr`` may be 0.0 to freeze the generator (the
    schedule then degenerates to plain discriminator training on the induced
    fixed source). ``alpha`` scales the shared value function.
    """

    latent: LatentConfig
    channel: ChannelConfig
    alpha: float = 1.0
    disc_steps_per_gen: int = 10
    gen_iterations: int = 500
    gen_lr: float = 0.0002
    disc_lr: float = 0.002
    batch: int = 512
    beta1: float = 0.5
    beta2: float = 0.999
    disc_dropout: float = 0.3
    eval_batches: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.alpha <= 0:
            raise CorticalError(f"alpha must be positive, got {self.alpha}")
        if self.disc_steps_per_gen < 1:
            raise CorticalError(
                f"disc_steps_per_gen must be >= 1, got {self.disc_steps_per_gen}")
        if self.gen_iterations < 1:
            raise CorticalError(
                f"gen_iterations must be >= 1, got {self.gen_iterations}")
        if self.gen_lr < 0:
            raise CorticalError(f"gen_lr must be >= 0, got {self.gen_lr}")
        if self.disc_lr <= 0:
            raise CorticalError(f"disc_lr must be positive, got {self.disc_lr}")
        if self.batch < 2:
            raise CorticalError(f"batch must be >= 2, got {self.batch}")
        if not 0.0 <= self.disc_dropout < 1.0:
            raise CorticalError(
                f"disc_dropout must lie in [0,1), got {self.disc_dropout}")
        if self.eval_batches < 1:
            raise CorticalError(
                f"eval_batches must be >= 1, got {self.eval_batches}")


@dataclass(frozen=True)
class CapacityReport:
    """Outcome of one capacity run.

    ``tilde`` is the primary capacity estimate, ``hat`` the joint-samples
    cross-check, ``reference`` the closed form log2(1+SNR). The traces hold
    one eval-mode readout per generator step; ``x``/``y`` are fresh
    constellation samples from the trained generator and its channel output.
    """

    snr_db: float
    tilde: MiValue
    hat: MiValue
    tilde_std_nats: float
    hat_std_nats: float
    reference: MiValue
    tilde_trace: np.ndarray
    hat_trace: np.ndarray
    x: np.ndarray
    y: np.ndarray


def generator_apply(params: NetParams, spec: MlpSpec, z: np.ndarray,
                    power: float) -> np.ndarray:
    """Plain-numpy generator forward: z -> power-normalized constellation."""
    tape = Tape()
    z = np.asarray(z, dtype=np.float64)
    out, _ = mlp_forward(tape, params, spec, tape.constant(z), "eval", None, power)
    return out.data.copy()


class InducedSource:
    """The (x, y) source a fixed generator induces through the channel.

    Presents the same sampling interface as ``GaussianSource``; the
    discriminator phase trains against it exactly as a standalone estimator
    run would. Generator parameters are held by reference, so in-place
    updates are visible immediately.
    """

    def __init__(self, gen_params: NetParams, gen_spec: MlpSpec,
                 latent: LatentConfig, channel: ChannelConfig):
        self.gen_params = gen_params
        self.gen_spec = gen_spec
        self.latent = latent
        self.channel = channel

    @property
    def dim(self) -> int:
        return self.channel.dim

    def sample(self, n: int, rng) -> SampleBatch:
        z = latent_sample(self.latent, n, rng)
        x = generator_apply(self.gen_params, self.gen_spec, z, self.channel.power)
        y = awgn_apply(x, self.channel.sigma2, rng, self.channel.real_noise)
        return SampleBatch(x=x, y=y, y_perm=derange(y, rng))


def _generator_streams(seed: int):
    """(init, batches) RNG lanes for the generator, disjoint from the
    discriminator's ``training_streams`` lanes."""
    return np.random.SeedSequence([int(seed), 1]).spawn(2)


def initial_generator(cfg: CorticalConfig):
    """The generator exactly as ``cortical_train`` initializes it."""
    spec = generator_spec(cfg.latent.width, cfg.channel.dim)
    init_ss, _ = _generator_streams(cfg.seed)
    return spec, mlp_init(spec, init_ss)


def cortical_train(cfg: CorticalConfig):
    """Run the alternating max-max schedule; returns (gen, disc, report).

    Repeats {k discriminator ascent steps on J_alpha with the generator
    frozen; one generator ascent step with the discriminator frozen}, every
    step on fresh batches, stopping after the last full cycle. The power
    constraint is asserted on ~1% of generator steps. Divergence (non-finite
    objective or gradient) aborts with the failing step index.
    """
    d = cfg.channel.dim
    gen_spec, gen_params = initial_generator(cfg)
    disc_spec = discriminator_spec(d, "softplus", cfg.disc_dropout)
    kind = EstimatorKind("ddime_tilde", alpha=cfg.alpha)

    init_ss, batch_ss, eval_ss = training_streams(cfg.seed)
    _, gen_batch_ss = _generator_streams(cfg.seed)
    readout_rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), 2]))

    disc_params = mlp_init(disc_spec, init_ss)
    disc_state = AdamState.for_params(disc_params)
    batch_rng = np.random.default_rng(batch_ss)
    gen_state = AdamState.for_params(gen_params)
    gen_rng = np.random.default_rng(gen_batch_ss)

    # carries (lr, betas) into the shared discriminator ascent step
    disc_cfg = TrainConfig(
        iterations=cfg.disc_steps_per_gen * cfg.gen_iterations, batch=cfg.batch,
        lr=cfg.disc_lr, beta1=cfg.beta1, beta2=cfg.beta2,
        dropout=cfg.disc_dropout, seed=cfg.seed, eval_batches=cfg.eval_batches)
    source = InducedSource(gen_params, gen_spec, cfg.latent, cfg.channel)

    tilde_trace = np.empty(cfg.gen_iterations)
    hat_trace = np.empty(cfg.gen_iterations)
    disc_iter = 0
    for step in range(cfg.gen_iterations):
        for _ in range(cfg.disc_steps_per_gen):
            batch = source.sample(cfg.batch, batch_rng)
            _ascend_step(kind, disc_params, disc_spec, disc_state, batch,
                         batch_rng, disc_cfg, None, disc_iter)
            disc_iter += 1
        _generator_step(cfg, gen_params, gen_spec, gen_state,
                        disc_params, disc_spec, gen_rng, step)
        tilde_trace[step], hat_trace[step] = _readout(
            disc_params, disc_spec, cfg.alpha, source, cfg.batch, readout_rng)

    eval_rng = np.random.default_rng(eval_ss)
    tildes = np.empty(cfg.eval_batches)
    hats = np.empty(cfg.eval_batches)
    for b in range(cfg.eval_batches):
        tildes[b], hats[b] = _readout(
            disc_params, disc_spec, cfg.alpha, source, cfg.batch, eval_rng)

    const_rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), 3]))
    z = latent_sample(cfg.latent, cfg.batch, const_rng)
    x = generator_apply(gen_params, gen_spec, z, cfg.channel.power)
    y = awgn_apply(x, cfg.channel.sigma2, const_rng, cfg.channel.real_noise)

    report = CapacityReport(
        snr_db=cfg.channel.snr_db,
        tilde=mi_from_nats(float(tildes.mean())),
        hat=mi_from_nats(float(hats.mean())),
        tilde_std_nats=float(tildes.std()),
        hat_std_nats=float(hats.std()),
        reference=mi_from_bits(awgn_capacity(cfg.channel.snr_db)),
        tilde_trace=tilde_trace, hat_trace=hat_trace, x=x, y=y)
    return gen_params, disc_params, report


def _generator_step(cfg, gen_params, gen_spec, gen_state, disc_params,
                    disc_spec, rng, step):
    """One ascent step on J_alpha w.r.t. the generator, discriminator frozen.

    The channel and derangement are drawn fresh and applied inside the tape,
    so gradients flow through y = x + noise and through the unpaired rows.
    The frozen discriminator runs in eval mode (no dropout).
    """
    n = cfg.batch
    z = latent_sample(cfg.latent, n, rng)
    sigma2 = cfg.channel.sigma2
    if sigma2 > 0.0:
        std = np.sqrt(sigma2 if cfg.channel.real_noise else sigma2 / 2.0)
        noise = std * rng.standard_normal((n, cfg.channel.dim))
    else:
        noise = np.zeros((n, cfg.channel.dim))
    k = int(rng.integers(1, n))
    perm = (np.arange(n) - k) % n  # row i of the deranged batch is y[(i-k) % n]

    tape = Tape()
    leaves = watch_params(tape, gen_params)
    try:
        x, _ = mlp_forward(tape, leaves, gen_spec, tape.constant(z),
                           "train", None, cfg.channel.power)
        if step % 100 == 0:
            p = float(np.mean(x.data * x.data))
            if abs(p - cfg.channel.power) > 1e-9:
                raise CorticalError(
                    f"power constraint violated at generator step {step}: "
                    f"mean power {p!r}, expected {cfg.channel.power!r}")
        y = tape.add(x, tape.constant(noise))
        d_joint, _ = mlp_forward(tape, disc_params, disc_spec,
                                 tape.concat_cols(x, y), "eval")
        d_marg, _ = mlp_forward(tape, disc_params, disc_spec,
                                tape.concat_cols(x, tape.permute_rows(y, perm)),
                                "eval")
        obj = tape.sub(tape.scale(tape.mean(tape.log(d_joint)), cfg.alpha),
                       tape.mean(d_marg))
        grads = tape.backward(obj)
        adam_step(gen_params, [-grads[t] for t in leaves], gen_state,
                  cfg.gen_lr, cfg.beta1, cfg.beta2)
    except (CorticalError, TrainingDiverged):
        raise
    except Exception as exc:
        raise TrainingDiverged(
            f"generator step {step} failed: {exc}") from exc


def _readout(disc_params, disc_spec, alpha, source, n, rng):
    """(tilde, hat) in nats from one fresh eval-mode batch."""
    batch = source.sample(n, rng)
    dj, _, dm, _ = eval_outputs(disc_params, disc_spec, batch)
    dj = np.maximum(dj, LOG_FLOOR)
    j = ddime_value(dj, dm, alpha)
    return ddime_tilde(j, alpha), ddime_hat(dj, alpha)


@dataclass(frozen=True)
class Constellation:
    """Labeled 2-d point sets: channel inputs ``x`` and outputs ``y``."""

    x: np.ndarray
    y: np.ndarray

    def rows(self):
        """(kind, re, im) tuples, inputs first."""
        out = [("x", float(re), float(im)) for re, im in self.x]
        out += [("y", float(re), float(im)) for re, im in self.y]
        return out


def export_constellation(gen_params: NetParams, cfg: CorticalConfig,
                         n: int, rng=None) -> Constellation:
    """Fresh latent batch through the trained generator and the channel.

    Only dim=2 constellations are exportable (points are plotted in the
    complex plane).
    """
    if cfg.channel.dim != 2:
        raise CorticalError(
            f"constellation export is 2-d only, got dim {cfg.channel.dim}")
    if n < 2:
        raise CorticalError(f"export needs n >= 2, got {n}")
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), 3]))
    gen_spec = generator_spec(cfg.latent.width, 2)
    z = latent_sample(cfg.latent, n, rng)
    x = generator_apply(gen_params, gen_spec, z, cfg.channel.power)
    y = awgn_apply(x, cfg.channel.sigma2, rng, cfg.channel.real_noise)
    return Constellation(x=x, y=y)
