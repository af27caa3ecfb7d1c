"""Write a synthetic 2x2 data set drawn from a bivariate logit-normal model.

Used for the demo file data/example_synthetic.csv; it is NOT real study data.

    python scripts/simulate_dataset.py --n 17 --seed 2024 > data/example_synthetic.csv
"""

import argparse
import sys

import numpy as np


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=17)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--mu", type=float, nargs=2, default=(0.65, -1.45))
    ap.add_argument("--sd", type=float, nargs=2, default=(0.32, 0.72))
    ap.add_argument("--rho", type=float, default=-0.2)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    sd1, sd2 = args.sd
    cov = [[sd1**2, args.rho * sd1 * sd2], [args.rho * sd1 * sd2, sd2**2]]
    out = sys.stdout
    out.write("study,TP,FN,FP,TN\n")
    for i in range(args.n):
        m = rng.multivariate_normal(args.mu, cov)
        n_dis = int(rng.integers(15, 80))
        n_non = int(rng.integers(40, 250))
        tp = int(rng.binomial(n_dis, 1 / (1 + np.exp(-m[0]))))
        fp = int(rng.binomial(n_non, 1 / (1 + np.exp(-m[1]))))
        out.write(f"s{i + 1:02d},{tp},{n_dis - tp},{fp},{n_non - fp}\n")


if __name__ == "__main__":
    main()
