"""Accuracy and suspect ratio against OPM coverage, per failure count.

One model pair is trained per coverage level on mixed failures; each is then
tested on 1, 2, 3 and mixed failure sets drawn over a different lightpath set.
"""

from _common import Network, Table, evaluate_models, parse, parser, train_models

FAILURE_SETS = {"1": (1,), "2": (2,), "3": (3,), "1-2-3": (1, 2, 3)}


def main():
    p = parser(__doc__)
    p.add_argument("--opm", type=int, nargs="+", default=[20, 40, 60, 80, 100], help="coverage levels, percent")
    args = parse(p)
    net = Network.load(args)
    table = Table(args.out, "sweep_opm")
    for pct in args.opm:
        train = net.dataset(opm=pct / 100, samples=args.train_samples, lps=args.lps, seed=args.seed + 1)
        models = train_models(train, args.epochs, args.seed)
        for label, n_f in FAILURE_SETS.items():
            test = net.dataset(
                opm=pct / 100, samples=args.test_samples, lps=args.lps, n_f_set=n_f, seed=args.seed + 2
            )
            key = {"opm_pct": pct, "failures": label, "lps": args.lps}
            table.add(evaluate_models(test, models, args.seed, key), key)
    table.write()


if __name__ == "__main__":
    main()
