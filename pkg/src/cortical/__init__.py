"""Discriminative mutual-information estimation and cooperative capacity learning.

The package has three layers. ``autodiff`` and ``nn`` are a small
reverse-mode tape and MLP/Adam toolkit on numpy. ``channel`` and
``estimators`` provide Gaussian/AWGN sources with closed-form references and
the neural MI estimators (i-DIME, d-DIME, MINE, NWJ, SMILE, InfoNCE).
``capacity``, ``harness``, ``plotting``, and ``cli`` build the cooperative
capacity-learning loop and the reproducible experiment tooling on top.
"""

from cortical.autodiff import Tape, Tensor, backward, grad_check
from cortical.capacity import (
    CapacityReport,
    CorticalConfig,
    CorticalError,
    LatentConfig,
    cortical_train,
    export_constellation,
    latent_sample,
)
from cortical.channel import (
    ChannelConfig,
    ChannelError,
    GaussianSource,
    GaussianSourceConfig,
    MiValue,
    SampleBatch,
    awgn_apply,
    awgn_capacity,
    derange,
    gaussian_mi,
    gaussian_pair_batch,
    mi_from_bits,
    mi_from_nats,
    snr_to_rho,
    snr_to_sigma2,
)
from cortical.estimators import (
    ESTIMATOR_NAMES,
    DiscreteOracle,
    EstimateTrace,
    EstimatorError,
    EstimatorKind,
    TrainConfig,
    TrainingDiverged,
    ddime_hat,
    ddime_tilde,
    ddime_value,
    discrete_mi_oracle,
    evaluate_estimator,
    fenchel_conjugate,
    idime_estimate,
    idime_estimate_from_probs,
    idime_value,
    infonce_estimate,
    instantaneous_estimate,
    loss_grad_check,
    mine_value,
    nwj_estimate,
    smile_estimate,
    tabular_expectation_samples,
    train_estimator,
)
from cortical.nn import (
    AdamState,
    CheckpointError,
    MlpSpec,
    NetParams,
    NnError,
    adam_step,
    discriminator_spec,
    generator_spec,
    load_mlp,
    mlp_forward,
    mlp_init,
    power_normalize,
    save_mlp,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "CapacityReport",
    "ChannelConfig",
    "ChannelError",
    "CheckpointError",
    "CorticalConfig",
    "CorticalError",
    "DiscreteOracle",
    "ESTIMATOR_NAMES",
    "EstimateTrace",
    "EstimatorError",
    "EstimatorKind",
    "GaussianSource",
    "GaussianSourceConfig",
    "LatentConfig",
    "MiValue",
    "MlpSpec",
    "NetParams",
    "NnError",
    "SampleBatch",
    "Tape",
    "Tensor",
    "TrainConfig",
    "TrainingDiverged",
    "adam_step",
    "awgn_apply",
    "awgn_capacity",
    "backward",
    "cortical_train",
    "ddime_hat",
    "ddime_tilde",
    "ddime_value",
    "derange",
    "discrete_mi_oracle",
    "discriminator_spec",
    "evaluate_estimator",
    "export_constellation",
    "fenchel_conjugate",
    "gaussian_mi",
    "gaussian_pair_batch",
    "generator_spec",
    "grad_check",
    "idime_estimate",
    "idime_estimate_from_probs",
    "idime_value",
    "infonce_estimate",
    "instantaneous_estimate",
    "latent_sample",
    "load_mlp",
    "loss_grad_check",
    "mi_from_bits",
    "mi_from_nats",
    "mine_value",
    "mlp_forward",
    "mlp_init",
    "nwj_estimate",
    "power_normalize",
    "save_mlp",
    "smile_estimate",
    "snr_to_rho",
    "snr_to_sigma2",
    "tabular_expectation_samples",
    "train_estimator",
]
