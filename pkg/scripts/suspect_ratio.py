"""Mean share of components the rules engine leaves undecided, per OPM coverage.

One fully monitored dataset is generated and re-masked to each coverage
level, so every level sees the same failures.
"""

import numpy as np

from _common import Network, parse, parser
from roadm_rinn.monitoring import deploy_uniform, with_deployment
from roadm_rinn.pipeline import Localizer, calibrate


def main():
    p = parser(__doc__)
    p.add_argument("--opm", type=int, nargs="+", default=[10, 20, 40, 60, 80, 100])
    p.add_argument("--failures", type=int, nargs="+", default=[1])
    args = parse(p)
    net = Network.load(args)
    full = net.dataset(opm=1.0, samples=args.test_samples, lps=args.lps, n_f_set=args.failures, seed=args.seed + 2)
    lines = ["opm_pct\tsuspect_ratio\tfaulty_ratio"]
    for pct in args.opm:
        ds = with_deployment(full, deploy_uniform(full.deployment.total, fraction=pct / 100))
        loc = Localizer(ds, calibrate(ds, seed=args.seed))
        parts = [loc.partition(s) for s in ds.samples]
        n = len(loc.all)
        suspect = np.mean([len(q.suspect) / n for q in parts])
        faulty = np.mean([len(q.faulty) / n for q in parts])
        lines.append(f"{pct}\t{suspect:.4f}\t{faulty:.4f}")
        print(lines[-1])
    args.out.mkdir(parents=True, exist_ok=True)
    label = "-".join(map(str, args.failures))
    (args.out / f"suspect_ratio_f{label}.tsv").write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
