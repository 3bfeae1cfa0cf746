"""Per-epoch training loss of the RINN and ANN classifiers."""

from _common import Network, parse, parser, train_models


def main():
    p = parser(__doc__)
    p.add_argument("--opm", type=int, nargs="+", default=[60, 100], help="coverage levels, percent")
    args = parse(p)
    net = Network.load(args)
    args.out.mkdir(parents=True, exist_ok=True)
    for pct in args.opm:
        train = net.dataset(opm=pct / 100, samples=args.train_samples, lps=args.lps, seed=args.seed + 1)
        models = train_models(train, args.epochs, args.seed)
        lines = ["epoch\trinn_loss\tann_loss"]
        for e, (r, a) in enumerate(zip(models.rinn_losses, models.ann_losses), start=1):
            lines.append(f"{e}\t{r:.8f}\t{a:.8f}")
        path = args.out / f"convergence_opm{pct:03d}.tsv"
        path.write_text("\n".join(lines) + "\n")
        print(path)


if __name__ == "__main__":
    main()
