"""Run the resonant-perturbation experiment at several epsilons and print the rate fits.

    python scripts/instability_sweep.py --eps 1e-2 3e-3 1e-3 --n-points 16384 --out out/sweep
"""
import argparse
import json
import os

from kgres.harness import ExperimentConfig, epsilon_sweep
from kgres.model import ModelParams


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--eps", type=float, nargs="+", default=[1e-2, 3e-3, 1e-3])
    ap.add_argument("--n-points", type=int, default=2**14)
    ap.add_argument("--precision", default="extended")
    ap.add_argument("--out", default="out/sweep")
    args = ap.parse_args()
    cfg = ExperimentConfig(params=ModelParams(), n_points=args.n_points, precision=args.precision)
    out = epsilon_sweep(cfg, args.eps)
    os.makedirs(args.out, exist_ok=True)
    summary = []
    for res in out["results"]:
        rep = res.report
        row = {"epsilon": res.config.epsilon, "runtime_s": res.runtime, "failure": res.failure}
        if rep is not None:
            row.update(rep.to_dict())
            print(f"eps={rep.epsilon:g}  slope={rep.slope_fitted:.4f}  Gamma1={rep.Gamma1_predicted:.4f}  "
                  f"ratio={rep.ratio:.3f}  amplification={rep.amplification_factor:.1f}  {rep.verdict}")
        summary.append(row)
    print("non-degrading:", out["non_degrading"])
    with open(os.path.join(args.out, "summary.json"), "w") as fh:
        json.dump({"runs": summary, "non_degrading": out["non_degrading"]}, fh, indent=2)


if __name__ == "__main__":
    main()
