"""Median first-passage time of the mixed urn against the rational fraction alpha.

Prints one row per alpha and the fitted slope of log(median) on 1/alpha.
Censored medians (fewer than half the runs reach the band) print as inf.
"""
import argparse

from paritail.polya import convergence_time_curve, fit_exponential_slowdown, run_ensemble


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alphas", type=float, nargs="+", default=[0.1, 0.15, 0.2, 0.3, 0.5, 1.0])
    ap.add_argument("--p", type=float, default=0.6)
    ap.add_argument("--arrivals", type=int, default=10_000)
    ap.add_argument("--runs", type=int, default=200)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    curve = convergence_time_curve(args.alphas, args.p, args.arrivals, args.runs, args.seed,
                                   on_censored="inf")
    print("alpha,median_first_passage,mean_final_pi,var_final_pi")
    for alpha, median in curve:
        stats = run_ensemble(alpha, args.p, args.arrivals, args.runs, args.seed)
        print(f"{alpha},{median},{stats.mean:.4f},{stats.variance:.5f}")
    slope, intercept = fit_exponential_slowdown(curve)
    print(f"# log(median) ~ {slope:.3f} / alpha + {intercept:.3f}")


if __name__ == "__main__":
    main()
