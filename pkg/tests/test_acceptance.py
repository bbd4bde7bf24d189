"""Acceptance suite: one test per release criterion, tolerances pinned.

Each test prints a ``[pass/FAIL] criterion N`` line with the measured
numbers so a log captures the evidence, and asserts the criterion's stated
tolerances. Short-running criteria assert their runtime budgets too; the
long training criteria (4, 6, 7) print wall time without asserting it so a
slow machine cannot flip a correctness gate.
"""

import csv
import time

import numpy as np
import pytest

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
    EstimatorKind,
    TrainConfig,
    ddime_tilde,
    ddime_value,
    discrete_mi_oracle,
    evaluate_estimator,
    idime_estimate,
    idime_estimate_from_probs,
    loss_grad_check,
    mine_value,
    nwj_estimate,
    smile_estimate,
    tabular_expectation_samples,
    train_estimator,
)
from cortical.harness import (
    ExperimentConfig,
    plugin_estimate,
    psk_mi_monte_carlo,
    run_capacity,
    run_sweep,
)
from cortical.plotting import render_plot

PLUGIN_JOINTS = {
    "independent": np.full((2, 2), 0.25),
    "bsc(0.1)": np.array([[0.45, 0.05], [0.05, 0.45]]),
    "correlated": np.diag([0.5, 0.5]),
}


def report(criterion: int, ok: bool, detail: str):
    flag = "pass" if ok else "FAIL"
    print(f"[{flag}] criterion {criterion}: {detail}")


def test_criterion_1_gradient_fidelity():
    start = time.perf_counter()
    batch = GaussianSource(GaussianSourceConfig(2, 0.6)).sample(
        16, np.random.default_rng(3))
    kinds = [EstimatorKind("idime"),
             EstimatorKind("ddime_tilde", alpha=0.1),
             EstimatorKind("ddime_tilde", alpha=1.0),
             EstimatorKind("ddime_tilde", alpha=10.0),
             EstimatorKind("mine"), EstimatorKind("nwj"),
             EstimatorKind("smile"), EstimatorKind("infonce")]
    errors = {k.name if k.alpha == 1.0 else f"{k.name}(a={k.alpha})":
              loss_grad_check(k, batch, d=2) for k in kinds}
    elapsed = time.perf_counter() - start
    worst = max(errors.values())
    ok = worst < 1e-4 and elapsed < 10.0
    report(1, ok, f"loss gradient max relative error {worst:.3e} < 1e-4 "
                  f"across {len(errors)} losses, {elapsed:.2f}s < 10s")
    assert worst < 1e-4, errors
    assert elapsed < 10.0


def test_criterion_2_plugin_exactness():
    start = time.perf_counter()
    names = ("idime", "ddime_hat", "ddime_tilde", "mine", "nwj", "smile")
    worst = 0.0
    for joint in PLUGIN_JOINTS.values():
        oracle = discrete_mi_oracle(joint)
        for name in names:
            err = abs(plugin_estimate(name, oracle) - oracle.mi.nats)
            worst = max(worst, err)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 1.0
    report(2, ok, f"plug-in worst error {worst:.3e} <= 1e-9 over "
                  f"3 joints x 6 estimators, {elapsed:.3f}s < 1s")
    assert worst <= 1e-9
    assert elapsed < 1.0


def test_criterion_3_identities():
    start = time.perf_counter()
    rng = np.random.default_rng(17)
    tj, tm = rng.normal(size=512), rng.normal(size=512)
    nwj_gap = abs(ddime_tilde(ddime_value(np.exp(tj - 1), np.exp(tm - 1),
                                          1.0), 1.0)
                  - nwj_estimate(tj, tm))
    smile_gap = abs(smile_estimate(3 * tj, 3 * tm, 1e6)
                    - mine_value(3 * tj, 3 * tm))
    pre = rng.uniform(-8.0, 8.0, size=512)
    idime_gap = abs(idime_estimate(pre)
                    - idime_estimate_from_probs(1 / (1 + np.exp(-pre))))
    triangle = max(abs(gaussian_mi(2, snr_to_rho(s)).bits - awgn_capacity(s))
                   for s in np.linspace(-20.0, 25.0, 91))
    elapsed = time.perf_counter() - start
    ok = (nwj_gap <= 1e-12 and smile_gap <= 1e-9 and idime_gap <= 1e-9
          and triangle <= 1e-12 and elapsed < 1.0)
    report(3, ok, f"nwj gap {nwj_gap:.1e} <= 1e-12, smile gap "
                  f"{smile_gap:.1e} <= 1e-9, idime gap {idime_gap:.1e} "
                  f"<= 1e-9, triangle {triangle:.1e} <= 1e-12, "
                  f"{elapsed:.3f}s < 1s")
    assert nwj_gap <= 1e-12
    assert smile_gap <= 1e-9
    assert idime_gap <= 1e-9
    assert triangle <= 1e-12
    assert elapsed < 1.0


def test_criterion_4_ddime_gaussian_sweep():
    start = time.perf_counter()
    summary = {}
    for snr in (-5.0, 0.0, 5.0, 10.0):
        rho = snr_to_rho(snr)
        truth = gaussian_mi(2, rho).nats
        source = GaussianSource(GaussianSourceConfig(2, rho))
        hats, tildes, hat_stds, tilde_stds = [], [], [], []
        for repeat in range(3):
            cfg = TrainConfig(iterations=5000, batch=512, lr=0.002,
                              seed=repeat, eval_batches=1)
            params, _ = train_estimator(EstimatorKind("ddime_tilde"),
                                        source, cfg=cfg)
            hat, hat_std = evaluate_estimator(
                params, EstimatorKind("ddime_hat"), source, batches=200,
                n=512, rng=np.random.default_rng(1000 + repeat))
            tilde, tilde_std = evaluate_estimator(
                params, EstimatorKind("ddime_tilde"), source, batches=200,
                n=512, rng=np.random.default_rng(1000 + repeat))
            hats.append(hat)
            tildes.append(tilde)
            hat_stds.append(hat_std)
            tilde_stds.append(tilde_std)
        summary[snr] = (truth, np.mean(hats), np.mean(tildes),
                        np.mean(hat_stds), np.mean(tilde_stds))
    elapsed = time.perf_counter() - start

    worst_hat = max(abs(v[1] - v[0]) for v in summary.values())
    worst_tilde = max(abs(v[2] - v[0]) for v in summary.values())
    truth10, hat10, tilde10, hat_std10, tilde_std10 = summary[10.0]
    hat_err10, tilde_err10 = abs(hat10 - truth10), abs(tilde10 - truth10)
    ordering = tilde_err10 <= hat_err10
    ok = worst_hat <= 0.25 and worst_tilde <= 0.25 \
        and tilde_std10 > hat_std10
    detail = (f"worst |hat-truth| {worst_hat:.4f} and |tilde-truth| "
              f"{worst_tilde:.4f} <= 0.25 nats over 4 SNRs x 3 repeats; "
              f"at 10 dB tilde err {tilde_err10:.4f} vs hat err "
              f"{hat_err10:.4f}; eval std tilde {tilde_std10:.4f} > hat "
              f"{hat_std10:.4f}; {elapsed:.0f}s (~15 min budget)")
    if not ordering:
        detail += (" [tilde err > hat err at 10 dB: allowed, documented "
                   "in test output]")
    report(4, ok, detail)
    for snr, (truth, hat, tilde, _, _) in summary.items():
        print(f"    snr {snr:5.1f}: truth {truth:.4f}  hat {hat:.4f}  "
              f"tilde {tilde:.4f}")
    assert worst_hat <= 0.25
    assert worst_tilde <= 0.25
    assert tilde_std10 > hat_std10


def test_criterion_5_bound_direction():
    start = time.perf_counter()
    oracle = discrete_mi_oracle(PLUGIN_JOINTS["bsc(0.1)"])
    prod = np.outer(oracle.px, oracle.py)
    rng = np.random.default_rng(7)
    worst = -np.inf
    for _ in range(200):
        critic = np.exp(rng.uniform(-2.0, 2.0, size=(2, 2)))
        d_joint = tabular_expectation_samples(oracle.joint, critic)
        d_marg = tabular_expectation_samples(prod, critic)
        tilde = ddime_tilde(ddime_value(d_joint, d_marg, 1.0), 1.0)
        worst = max(worst, tilde - oracle.mi.nats)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 5.0
    report(5, ok, f"max(tilde - MI) {worst:.3e} <= 1e-9 over 200 random "
                  f"positive critics, {elapsed:.2f}s < 5s")
    assert worst <= 1e-9
    assert elapsed < 5.0


def test_criterion_6_cortical_continuous():
    start = time.perf_counter()
    finals = {}
    for snr in (0.0, 5.0, 10.0):
        cfg = CorticalConfig(
            latent=LatentConfig.gaussian(30),
            channel=ChannelConfig(dim=2, snr_db=snr, real_noise=True),
            seed=1)
        _, _, rep = cortical_train(cfg)
        finals[snr] = (rep.tilde.nats, awgn_capacity(snr) * LN2)
    elapsed = time.perf_counter() - start

    within = all(est >= 0.9 * truth for est, truth in finals.values())
    below = all(est <= truth + 0.15 for est, truth in finals.values())
    estimates = [finals[s][0] for s in (0.0, 5.0, 10.0)]
    monotone = estimates[0] < estimates[1] < estimates[2]
    ok = within and below and monotone
    pieces = ", ".join(f"{s} dB {est:.4f}/{truth:.4f}"
                       for s, (est, truth) in finals.items())
    report(6, ok, f"final tilde vs ln(1+SNR): {pieces}; within 10% "
                  f"{within}, never above by >0.15 {below}, monotone "
                  f"{monotone}; {elapsed:.0f}s (~20 min budget)")
    assert within
    assert below
    assert monotone


def cluster_count(points: np.ndarray, radius: float) -> int:
    centers = []
    for p in points:
        for c in centers:
            if np.hypot(p[0] - c[0], p[1] - c[1]) <= radius:
                break
        else:
            centers.append(p)
    return len(centers)


def test_criterion_7_cortical_discrete():
    start = time.perf_counter()
    psk = psk_mi_monte_carlo(8, 10.0, draws=2_000_000, seed=0)
    cfg = CorticalConfig(
        latent=LatentConfig.discrete(8),
        channel=ChannelConfig(dim=2, snr_db=10.0, real_noise=True),
        seed=0)
    gen, _, rep = cortical_train(cfg)
    const = export_constellation(gen, cfg, n=512)
    elapsed = time.perf_counter() - start

    ceiling = np.log(8) + 0.05
    trace_max = float(rep.hat_trace.max())
    x_points = np.array([(re, im) for kind, re, im in const.rows()
                         if kind == "x"])
    clusters = cluster_count(x_points, 0.05)
    ok = (trace_max <= ceiling and rep.hat.nats <= ceiling
          and rep.tilde.nats <= ceiling
          and rep.tilde.nats >= psk - 0.15 and rep.hat.nats >= psk - 0.15
          and clusters <= 8)
    report(7, ok, f"per-step hat max {trace_max:.4f} and final "
                  f"tilde/hat {rep.tilde.nats:.4f}/{rep.hat.nats:.4f} <= "
                  f"ln8+0.05 = {ceiling:.4f}; final >= 8-PSK MI "
                  f"{psk:.4f} - 0.15; constellation clusters {clusters} "
                  f"<= 8 at radius 0.05; {elapsed:.0f}s (~10 min budget)")
    assert trace_max <= ceiling
    assert rep.hat.nats <= ceiling
    assert rep.tilde.nats <= ceiling
    assert rep.tilde.nats >= psk - 0.15
    assert rep.hat.nats >= psk - 0.15
    assert clusters <= 8


def strip_wall_ms(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows and rows[0] and rows[0][-1] == "wall_ms":
        return [row[:-1] for row in rows]
    return rows


def test_criterion_8_reproducibility(tmp_path):
    sweep_cfg = ExperimentConfig(
        kind="estimator-sweep",
        estimators=(EstimatorKind("ddime_hat"), EstimatorKind("mine")),
        snr_grid=(0.0, 10.0), repeats=1, iterations=60, batch=64,
        eval_batches=8, out_dir=str(tmp_path / "sweep"))
    cap_cfg = ExperimentConfig(
        kind="capacity-run", snr_grid=(5.0,), latent="gaussian",
        latent_dim=6, gen_iterations=5, disc_steps_per_gen=2, batch=64,
        eval_batches=4, out_dir=str(tmp_path / "cap"))

    first = run_sweep(sweep_cfg)
    sweep_data = strip_wall_ms(first.data_path)
    summary_bytes = open(first.summary_path, "rb").read()
    svg_first = render_plot(first.summary_path, kind="line")

    rerun = run_sweep(sweep_cfg)
    sweep_same = strip_wall_ms(rerun.data_path) == sweep_data
    summary_same = open(rerun.summary_path, "rb").read() == summary_bytes
    svg_same = render_plot(rerun.summary_path, kind="line") == svg_first

    cap_first = run_capacity(cap_cfg)
    cap_data = strip_wall_ms(cap_first.data_path)
    const_bytes = open(cap_first.constellation_path, "rb").read()
    scatter_first = render_plot(cap_first.constellation_path, kind="scatter")
    cap_rerun = run_capacity(cap_cfg)
    cap_same = strip_wall_ms(cap_rerun.data_path) == cap_data
    const_same = open(cap_rerun.constellation_path, "rb").read() == const_bytes
    scatter_same = render_plot(cap_rerun.constellation_path,
                               kind="scatter") == scatter_first

    ok = all((sweep_same, summary_same, svg_same, cap_same, const_same,
              scatter_same))
    report(8, ok, f"rerun byte-identity: sweep data columns {sweep_same}, "
                  f"summary {summary_same}, line SVG {svg_same}, capacity "
                  f"data columns {cap_same}, constellation {const_same}, "
                  f"scatter SVG {scatter_same}")
    assert sweep_same
    assert summary_same
    assert svg_same
    assert cap_same
    assert const_same
    assert scatter_same
