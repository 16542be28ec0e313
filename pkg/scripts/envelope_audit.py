"""Stratified audit of the symbolic-flow growth envelope; writes envelope.csv."""
import argparse

from kgres.model import ModelParams, solve_phase
from kgres.symflow import FlowSetup, gaussian_dtg, growth_envelope_audit, stratified_samples, write_envelope_csv


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--eps", type=float, default=1e-2)
    ap.add_argument("--kind", default="pp")
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--out", default="envelope.csv")
    args = ap.parse_args()
    p = ModelParams(epsilon=args.eps)
    ph = solve_phase(p)
    setup = FlowSetup(p, ph, gaussian_dtg(p, ph), kind=args.kind)
    rows = growth_envelope_audit(setup, stratified_samples(setup, args.n))
    write_envelope_csv(rows, args.out)
    worst = max(rows, key=lambda r: r.a)
    print(f"gamma+={worst.gamma_plus:.5f}  max fitted a={worst.a:.5f} ({worst.regime})  "
          f"failures={sum(not r.passed for r in rows)}/{len(rows)}")


if __name__ == "__main__":
    main()
