"""Estimate the MI of a correlated 2-d Gaussian pair with d-DIME.

Trains the discriminator once, then reads the same trained network out two
ways: the hat readout (mean log(D/alpha) on joint samples) and the tilde
readout (J/alpha + 1 - log alpha, a lower bound in expectation). The closed
form -d/2 log(1 - rho^2) says what the answer should be.

Runs in a few seconds on one CPU core.
"""

import numpy as np

from cortical import (
    EstimatorKind,
    GaussianSource,
    GaussianSourceConfig,
    TrainConfig,
    evaluate_estimator,
    gaussian_mi,
    snr_to_rho,
    train_estimator,
)


def main():
    snr_db = 5.0
    rho = snr_to_rho(snr_db)
    truth = gaussian_mi(2, rho)
    source = GaussianSource(GaussianSourceConfig(dim=2, rho=rho))
    print(f"2-d Gaussian pair at {snr_db:.0f} dB (rho = {rho:.4f}), "
          f"true MI {truth.nats:.4f} nats = {truth.bits:.4f} bits")

    cfg = TrainConfig(iterations=1200, batch=256, lr=0.002, seed=0,
                      eval_batches=1)
    params, trace = train_estimator(EstimatorKind("ddime_tilde"), source,
                                    cfg=cfg)
    for step in (0, 300, 600, 900, 1199):
        print(f"  step {step:4d}: objective {trace.values[step]:+.4f}")

    rng = np.random.default_rng(42)
    hat, hat_std = evaluate_estimator(params, EstimatorKind("ddime_hat"),
                                      source, batches=100, n=256,
                                      rng=np.random.default_rng(42))
    tilde, tilde_std = evaluate_estimator(params,
                                          EstimatorKind("ddime_tilde"),
                                          source, batches=100, n=256,
                                          rng=rng)
    print(f"hat readout   {hat:.4f} nats (per-batch std {hat_std:.4f}), "
          f"error {hat - truth.nats:+.4f}")
    print(f"tilde readout {tilde:.4f} nats (per-batch std {tilde_std:.4f}), "
          f"error {tilde - truth.nats:+.4f}")
    print("note the tilde readout's larger spread; its mean stays below "
          "the true MI")


if __name__ == "__main__":
    main()
