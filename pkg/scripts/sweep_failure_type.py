"""Accuracy per failure category and failure count at a fixed OPM coverage."""

from _common import Network, Table, evaluate_models, parse, parser, train_models
from roadm_rinn.topology import CATEGORIES


def main():
    p = parser(__doc__)
    p.add_argument("--opm", type=int, default=60, help="coverage, percent")
    args = parse(p)
    net = Network.load(args)
    train = net.dataset(opm=args.opm / 100, samples=args.train_samples, lps=args.lps, seed=args.seed + 1)
    models = train_models(train, args.epochs, args.seed)
    table = Table(args.out, f"sweep_failure_type_opm{args.opm:03d}")
    for category in CATEGORIES:
        for n in (1, 2, 3):
            test = net.dataset(
                opm=args.opm / 100,
                samples=args.test_samples,
                lps=args.lps,
                n_f_set=(n,),
                type_filter=category,
                seed=args.seed + 2,
            )
            key = {"opm_pct": args.opm, "failures": str(n), "failure_type": category, "lps": args.lps}
            table.add(evaluate_models(test, models, args.seed, key), key)
    table.write()


if __name__ == "__main__":
    main()
