"""Command-line entry point: ``ellipsoid-lab {fit,sweep,diagnose,verify}``.

Exit codes: 0 on success, 2 when a construction or certificate fails,
1 on usage, configuration or I/O errors.
"""
import argparse
import json
import sys

from .diagnostics import diagnose
from .ellipsoid import certificates_pass, fit_ellipsoid, load_q, save_q, verify
from .exceptions import EllipsoidLabError
from .harness import SweepConfig, run_sweep
from .sampling import PointCloud, sample_cloud

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILED = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _u64(text):
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"{text} is not an unsigned 64-bit integer")
    return value


def _dump(doc):
    print(json.dumps(doc, indent=2, default=float))


def _print_summary(summary):
    width = max(len(k) for k in summary)
    for key, value in summary.items():
        print(f"{key:<{width}}  {value}")


def cmd_fit(args):
    cloud = sample_cloud(args.d, args.n, args.seed)
    result = fit_ellipsoid(cloud)
    if args.cloud_out:
        cloud.save(args.cloud_out)
    if args.emit_q:
        if result.q is None:
            print(f"no Q to emit (status {result.status})", file=sys.stderr)
        else:
            save_q(args.emit_q, result.q)
    summary = {"d": cloud.d, "n": cloud.n, "seed": cloud.seed, **result.summary()}
    if args.json:
        _dump(summary)
    else:
        _print_summary(summary)
    return EXIT_OK if result.success else EXIT_FAILED


def cmd_sweep(args):
    config = SweepConfig.load(args.config)
    config.output_path = args.out
    config.validate()

    def progress(done, total):
        if args.progress:
            print(f"\r{done}/{total}", end="", file=sys.stderr, flush=True)

    result = run_sweep(config, record_timing=not args.no_timing, progress=progress)
    if args.progress:
        print(file=sys.stderr)
    for d in result.dimensions():
        t = result.threshold_estimate[d]
        shown = "undefined (no 1/2 crossing)" if t is None else f"{t:.4f}"
        print(f"d={d}: threshold {shown}  (conjectured existence threshold 0.25)")
    print(f"wrote {len(result.records)} rows to {args.out}")
    return EXIT_OK


def cmd_diagnose(args):
    cloud = sample_cloud(args.d, args.n, args.seed)
    report = diagnose(cloud, tail_samples=args.tail_samples)
    doc = report.to_dict()
    if args.json:
        _dump(doc)
    else:
        _print_summary(doc["fit"])
        ev = doc["events"]
        print(f"E1 {ev['e1_holds']}: ||M^-1|| = {ev['m_inv_norm']:.4g}, ||M - EM|| = {ev['m_dev_norm']:.4g}")
        print(f"E2 {ev['e2_holds']}: ||eps||_inf = {ev['eps_inf']:.4g} "
              f"(cutoff {ev['thresholds_used']['eps_inf_max']:.4g})")
        print(f"E3 {ev['e3_holds']}: ||delta||_inf = {ev['delta_inf']:.4g} "
              f"(cutoff {ev['thresholds_used']['delta_inf_max']:.4g})")
        et, tt = doc["epsilon_tail"], doc["tensor_tail"]
        print(f"eps mean {et['mean']:.5g} (exact {doc['epsilon_moments']['mean']:.5g}), "
              f"variance {et['variance']:.5g} (exact {doc['epsilon_moments']['variance']:.5g})")
        print(f"eps psi2 ~ {et['fitted_psi2']:.4g}; tensor psi1 * d ~ {tt['psi1_in_units_of_inv_d']:.4g}")
    return EXIT_OK if report.fit["status"] == "Success" else EXIT_FAILED


def cmd_verify(args):
    cloud = PointCloud.load(args.cloud)
    Q = load_q(args.q)
    residual, min_eig = verify(cloud, Q)
    ok = certificates_pass(residual, min_eig)
    print(f"max_residual {residual:.6e}")
    print(f"min_eig      {min_eig:.6e}")
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_FAILED


def build_parser():
    parser = _Parser(prog="ellipsoid-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="sample a cloud and fit an ellipsoid through it")
    p.add_argument("-d", type=int, required=True)
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--seed", type=_u64, required=True)
    p.add_argument("--emit-q", metavar="PATH")
    p.add_argument("--cloud-out", metavar="PATH")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sweep", help="run a phase-transition sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-timing", action="store_true",
                   help="write zero wall times so the CSV is reproducible byte for byte")
    p.add_argument("--progress", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("diagnose", help="fit plus concentration-event and tail diagnostics")
    p.add_argument("-d", type=int, required=True)
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--seed", type=_u64, required=True)
    p.add_argument("--tail-samples", type=int, default=20_000)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("verify", help="check a Q matrix against a saved cloud")
    p.add_argument("--cloud", required=True)
    p.add_argument("--q", required=True)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, EllipsoidLabError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
