"""Command line interface.

    excitrans screen --n-sites 6 --samples 1000000 --seed 1 --out run6
    excitrans network --out run6
    excitrans consistency --out run6
    excitrans cluster --out run6
    excitrans run --n-sites 6 --samples 1000000 --seed 1 --out run6   # all stages

Exit codes: 0 success, 1 usage error, 2 missing or incompatible input,
3 numerical failure.
"""

import argparse
import logging
import sys

from . import analysis, network
from . import pipeline as P
from .campaign import CampaignConfig
from .dynamics import WINDOW
from .errors import MissingInputError, NumericalError, SchemaVersionError
from .figures import KINDS, emit_figure_data

EXIT_USAGE, EXIT_INPUT, EXIT_NUMERICAL = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _p_grid(text):
    try:
        vals = [float(x) for x in text.split(",")] if "," in text else None
        if vals is None:
            lo, hi, step = (float(x) for x in text.split(":"))
            count = int(round((hi - lo) / step)) + 1
            vals = [round(lo + i * step, 10) for i in range(count)]
    except ValueError:
        raise argparse.ArgumentTypeError("use 'lo:hi:step' or a comma list, e.g. 1.1:2.2:0.1")
    return tuple(vals)


def _seed(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--seed", type=_seed, default=0, help="master seed (64-bit)")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("-v", "--verbose", action="store_true")

    screen = argparse.ArgumentParser(add_help=False)
    screen.add_argument("--n-sites", type=int, required=True)
    screen.add_argument("--samples", type=int, default=1_000_000)
    screen.add_argument("--threshold", type=float, default=0.9)
    screen.add_argument("--window", type=float, default=WINDOW,
                        help=f"transport time window in hbar/J (default {WINDOW:.6g})")

    net = argparse.ArgumentParser(add_help=False)
    net.add_argument("--cutoff-coverage", type=float, default=0.999)

    clus = argparse.ArgumentParser(add_help=False)
    clus.add_argument("--p-grid", type=_p_grid, default=network.DEFAULT_P_GRID)
    clus.add_argument("--p", type=float, default=None,
                      help="granularity; default: chosen from the consistency curve")
    clus.add_argument("--no-self-loops", action="store_true")

    rob = argparse.ArgumentParser(add_help=False)
    rob.add_argument("--trials", type=int, default=1000)
    rob.add_argument("--side", type=float, default=0.05)
    rob.add_argument("--fixed-terminals", action="store_true",
                     help="keep input/output sites in place during displacement")

    mod = argparse.ArgumentParser(add_help=False)
    mod.add_argument("--link-cut", type=float, default=analysis.LINK_CUT)
    mod.add_argument("--occ-cut", type=float, default=analysis.OCC_CUT)

    fig = argparse.ArgumentParser(add_help=False)
    fig.add_argument("--kind", action="append", choices=sorted(KINDS),
                     help="figure table to emit (repeatable); default all available")

    parser = _Parser(prog="excitrans", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="stage", required=True, parser_class=_Parser)
    sub.add_parser("screen", parents=[common, screen], help="random structure screening")
    sub.add_parser("network", parents=[common, net], help="similarity network and cutoff")
    sub.add_parser("consistency", parents=[common, clus], help="MCL scan and consistency curve")
    sub.add_parser("cluster", parents=[common, clus], help="MCL at the chosen granularity")
    sub.add_parser("superpose", parents=[common], help="aligned cluster representatives")
    sub.add_parser("ipr", parents=[common], help="maximum inverse participation ratios")
    sub.add_parser("robustness", parents=[common, rob], help="random displacement losses")
    sub.add_parser("ablate", parents=[common, mod], help="inactive modules and their removal")
    sub.add_parser("spectra", parents=[common], help="eigenvalue shifts")
    sub.add_parser("figures", parents=[common, fig], help="figure data tables")
    sub.add_parser("run", parents=[common, screen, net, clus, rob, mod], help="all stages")
    return parser


def _config(args):
    return CampaignConfig(n_sites=args.n_sites, samples=args.samples,
                          eps_threshold=args.threshold, master_seed=args.seed,
                          workers=args.workers, output_dir=args.out, window=args.window)


def dispatch(args):
    stage, out = args.stage, args.out
    if stage in ("screen", "run"):
        cfg = _config(args)
        if stage == "screen":
            s = P.run_screen(cfg)
            print(f"{s.samples_run} structures, {s.hits} hits (rate {s.hit_rate:.3g}), "
                  f"max eps {s.max_eps:.4f}, {s.wall_time:.1f}s")
            return
        P.run_all(cfg, args.cutoff_coverage, args.p_grid, args.p, args.trials, args.side,
                  args.link_cut, args.occ_cut, not args.no_self_loops,
                  not args.fixed_terminals)
        return
    self_loops = not getattr(args, "no_self_loops", False)
    if stage == "network":
        net = P.run_network(out, args.cutoff_coverage)
        print(f"{net.n_nodes} nodes, {net.n_edges} edges, cutoff S*={net.cutoff:.4f}")
    elif stage == "consistency":
        curve = P.run_consistency(out, args.p_grid, self_loops)
        for p, c, k in zip(curve.p_values, curve.c_values, curve.n_clusters):
            print(f"p={p:.2f}  C={c:.4f}  clusters={k}")
    elif stage == "cluster":
        a = P.run_cluster(out, args.p, args.p_grid, self_loops)
        for rank, c, pop, frac in network.cluster_report(a)[:10]:
            print(f"cluster {c}: {pop} ({100 * frac:.1f}%)")
    elif stage == "superpose":
        P.run_superpose(out, args.seed)
    elif stage == "ipr":
        P.run_ipr(out)
    elif stage == "robustness":
        P.run_robustness(out, args.trials, args.side, args.seed, args.workers,
                         not args.fixed_terminals)
    elif stage == "ablate":
        P.run_ablate(out, args.link_cut, args.occ_cut)
    elif stage == "spectra":
        P.run_spectra(out)
    elif stage == "figures":
        print("wrote", ", ".join(emit_figure_data(out, args.kind)))


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        dispatch(args)
    except (MissingInputError, SchemaVersionError) as e:
        print(f"excitrans: {e}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as e:
        print(f"excitrans: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as e:
        print(f"excitrans: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"excitrans: {e}", file=sys.stderr)
        return EXIT_INPUT
    return 0


if __name__ == "__main__":
    sys.exit(main())
