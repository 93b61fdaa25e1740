"""Onset frame of quiescent and necrotic cells as a function of the nutrient
uptake coefficient alpha, with the rank correlation between the two."""
import argparse

from toporad.growth import GrowthParams, alpha_sweep
from toporad.stats import spearman


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alphas", default="0,0.2,0.4,0.6,0.8,1.0")
    ap.add_argument("--t-end", type=float, default=None, help="override the simulated time span")
    ap.add_argument("--sample-every", type=int, default=100)
    ap.add_argument("--kappa", type=float, default=8)
    args = ap.parse_args()

    alphas = [float(a) for a in args.alphas.split(",")]
    base = GrowthParams() if args.t_end is None else GrowthParams(t_end=args.t_end)
    rows = alpha_sweep(alphas, base, args.sample_every, args.kappa)
    n_frames = base.n_steps // args.sample_every + 1

    print(f"{'alpha':>6} {'quiescent':>10} {'necrotic':>10}")
    for r in rows:
        q = "none" if r.onset_quiescent is None else r.onset_quiescent
        d = "none" if r.onset_necrotic is None else r.onset_necrotic
        print(f"{r.alpha:6.2f} {q!s:>10} {d!s:>10}")

    # a missing onset is treated as censored at the end of the run
    for cell in ("quiescent", "necrotic"):
        onsets = [getattr(r, f"onset_{cell}") for r in rows]
        onsets = [n_frames if o is None else o for o in onsets]
        rho, p = spearman(alphas, onsets)
        print(f"spearman(alpha, {cell} onset): rho={rho:.3f} p={p:.4g}")


if __name__ == "__main__":
    main()
