"""Resonant run plus the two control runs (carrier moved off resonance, orthogonal polarization)."""
import argparse

from kgres.harness import ExperimentConfig, control_experiment, instability_experiment
from kgres.model import ModelParams


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--eps", type=float, default=1e-2)
    ap.add_argument("--n-points", type=int, default=2**14)
    args = ap.parse_args()
    cfg = ExperimentConfig(params=ModelParams(epsilon=args.eps), n_points=args.n_points)
    main_run = instability_experiment(cfg)
    ref = main_run.report.slope_fitted
    print(f"resonant      slope={ref:.4f}  amplification={main_run.report.amplification_factor:.2f}")
    for kind in ("off_resonance", "orthogonal"):
        rep = control_experiment(cfg, kind, reference_slope=ref).report
        print(f"{kind:13s} slope={rep.slope_fitted:.4f}  amplification={rep.amplification_factor:.2f}  {rep.verdict}")


if __name__ == "__main__":
    main()
