"""Compare five MI estimators on the same Gaussian task, end to end.

Uses the experiment harness exactly as the command line would: one sweep
over two SNR points, a summary CSV averaged over repeats, and an SVG plot
of every estimator against the closed form. Outputs land in
demos/output/shootout/.

Takes about half a minute on one CPU core. The full-scale version of this
experiment is `cortical sweep --estimator ... --snr-db -5,0,5,10
--iters 5000 --batch 512 --repeats 10`.

SMILE's clip threshold tau needs headroom above the largest MI on the
grid: once the marginal term saturates the clip, the critic can drift
upward without bound and the estimate with it (try tau=5 at 10 dB to see
that failure mode).
"""

import os

from cortical import EstimatorKind
from cortical.harness import ExperimentConfig, run_sweep
from cortical.plotting import write_plot

OUT_DIR = os.path.join(os.path.dirname(__file__), "output", "shootout")


def main():
    cfg = ExperimentConfig(
        kind="estimator-sweep",
        estimators=(EstimatorKind("ddime_hat"),
                    EstimatorKind("ddime_tilde"),
                    EstimatorKind("mine"),
                    EstimatorKind("nwj"),
                    EstimatorKind("smile", tau=10.0)),
        snr_grid=(0.0, 10.0),
        repeats=2,
        iterations=800,
        batch=128,
        eval_batches=50,
        seed_base=0,
        out_dir=OUT_DIR,
    )
    result = run_sweep(cfg)
    print(f"wrote {result.data_path}")
    print(f"wrote {result.summary_path}")

    with open(result.summary_path) as fh:
        header = fh.readline().strip().split(",")
        idx = {name: header.index(name) for name in
               ("estimator", "snr_db", "mean_estimate_nats", "truth_nats")}
        print(f"{'estimator':<12} {'snr':>5} {'estimate':>9} {'truth':>7}")
        for line in fh:
            row = line.strip().split(",")
            print(f"{row[idx['estimator']]:<12} "
                  f"{float(row[idx['snr_db']]):>5.1f} "
                  f"{float(row[idx['mean_estimate_nats']]):>9.4f} "
                  f"{float(row[idx['truth_nats']]):>7.4f}")

    svg = os.path.join(OUT_DIR, "shootout.svg")
    write_plot(result.summary_path, svg, kind="line")
    print(f"wrote {svg}")


if __name__ == "__main__":
    main()
