"""Accuracy and per-sample inference time against the number of lightpaths.

Models are trained once; the feature width depends only on the network, so
the same pair is evaluated on every lightpath count.
"""

from _common import Network, Table, evaluate_models, parse, parser, train_models


def main():
    p = parser(__doc__)
    p.add_argument("--opm", type=int, default=60, help="coverage, percent")
    p.add_argument("--counts", type=int, nargs="+", default=[20, 40, 60, 80, 100])
    args = parse(p)
    net = Network.load(args)
    train = net.dataset(opm=args.opm / 100, samples=args.train_samples, lps=args.lps, seed=args.seed + 1)
    models = train_models(train, args.epochs, args.seed)
    table = Table(args.out, f"sweep_lps_opm{args.opm:03d}")
    for count in args.counts:
        test = net.dataset(opm=args.opm / 100, samples=args.test_samples, lps=count, seed=args.seed + 2)
        key = {"opm_pct": args.opm, "failures": "1-2-3", "lps": count}
        table.add(evaluate_models(test, models, args.seed, key), key)
    table.write()


if __name__ == "__main__":
    main()
