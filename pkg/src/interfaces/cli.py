import argparse
import json
import sys
from pathlib import Path

from harness.experiment import load_experiment_config, run_experiment, write_results
from network.manet import ManetConfig, generate_samples, load_sample, pick_endpoints, preset, sample_to_document
from network.netmodel import EndpointPair
from rating.fec import fec_table
from rating.ror import MODES, rate_pattern
from routing.capillary import build_capillary
from routing.export import export_dot, load_pattern, save_pattern
from utils.config import Config
from utils.errors import CapillaryError, ValidationError
from utils.logger import get_logger
from utils.models import FecParams

log = get_logger("CLI")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


class _Parser(argparse.ArgumentParser):
    """Usage errors count as validation errors (exit 1), not argparse's exit 2."""

    def error(self, message):
        raise ValidationError(message)


def _read(path):
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise ValidationError(f"File not found: {path}") from e


def _emit(text, out=None):
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
        log.info(f"Wrote {out}")
    else:
        sys.stdout.write(text)


# =========================================================================
# COMMAND HANDLERS
# =========================================================================

def cmd_generate(args):
    """MANET preset or config file -> one sample file per timeframe."""
    if args.config:
        cfg = ManetConfig.from_dict(json.loads(_read(args.config)))
    else:
        cfg = preset(args.preset)
    if args.seed is not None:
        cfg = ManetConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for frame, net in enumerate(generate_samples(cfg)):
        (out_dir / f"frame_{frame:04d}.json").write_text(sample_to_document(net, cfg, frame), encoding="utf-8")
    log.info(f"Wrote {cfg.timeframes} sample(s) to {out_dir}")
    return EXIT_OK


def cmd_route(args):
    """Network file + endpoints -> capillary routing pattern as JSON or DOT."""
    _, net = load_sample(_read(args.network))
    if args.source is None and args.sink is None:
        ends = pick_endpoints(net, args.seed)
        log.info(f"Picked endpoints {ends.source} -> {ends.sink}")
    elif args.source is None or args.sink is None:
        raise ValidationError("--source and --sink must be given together")
    else:
        ends = EndpointPair(args.source, args.sink)
    pattern, layers = build_capillary(net, ends, args.layers)
    for result in layers:
        log.info(f"Layer {result.layer}: F={result.factor:.6g}, B={len(result.bottlenecks)}, "
                 f"hunting iterations={result.hunting_iterations}")
    _emit(export_dot(pattern) if args.dot else save_pattern(pattern), args.out)
    return EXIT_OK


def cmd_fec_table(args):
    """FEC_p / M rate increase factors for p = 0.01..0.50 and M = 1..m-max."""
    table = fec_table(der=args.der, m_max=args.m_max)
    _emit(table.to_csv(index=False, float_format="%.10g"), args.out)
    return EXIT_OK


def cmd_ror(args):
    """Pattern file -> ROR report JSON."""
    pattern = load_pattern(_read(args.pattern))
    report = rate_pattern(pattern, args.t, args.mode, FecParams(M=args.m, DER=args.der))
    _emit(json.dumps(report.to_dict(), indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_experiment(args):
    """Experiment config -> ROR and hunting-statistics CSVs."""
    cfg = load_experiment_config(args.config)
    result = run_experiment(cfg)
    for path in write_results(result, args.out_dir, args.prefix):
        log.info(f"Wrote {path}")
    if result.dropped:
        log.warning(f"{result.dropped} sample(s) dropped from every layer")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "route": cmd_route,
    "fec-table": cmd_fec_table,
    "ror": cmd_ror,
    "experiment": cmd_experiment,
}


def build_parser():
    parser = _Parser(prog="capillary", description="Capillary routing construction and ROR rating")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    gen = sub.add_parser("generate", help=cmd_generate.__doc__)
    source = gen.add_mutually_exclusive_group(required=True)
    source.add_argument("--preset", help="named MANET preset (fig15, fig17, fig18, desk)")
    source.add_argument("--config", help="JSON file with MANET config fields")
    gen.add_argument("--seed", type=int)
    gen.add_argument("--out-dir", default=str(Config.DATA_DIR / "samples"))

    route = sub.add_parser("route", help=cmd_route.__doc__)
    route.add_argument("network")
    route.add_argument("--source", type=int)
    route.add_argument("--sink", type=int)
    route.add_argument("--layers", type=int, default=Config.MAX_LAYERS)
    route.add_argument("--seed", type=int, default=0, help="endpoint draw seed when none are given")
    route.add_argument("--dot", action="store_true", help="emit Graphviz DOT instead of JSON")
    route.add_argument("--out")

    table = sub.add_parser("fec-table", help=cmd_fec_table.__doc__)
    table.add_argument("--der", type=float, default=Config.FEC_DER)
    table.add_argument("--m-max", type=int, default=10)
    table.add_argument("--out")

    ror = sub.add_parser("ror", help=cmd_ror.__doc__)
    ror.add_argument("pattern")
    ror.add_argument("--t", type=float, required=True)
    ror.add_argument("--mode", choices=MODES, required=True)
    ror.add_argument("--m", type=int, default=Config.FEC_M)
    ror.add_argument("--der", type=float, default=Config.FEC_DER)
    ror.add_argument("--out")

    exp = sub.add_parser("experiment", help=cmd_experiment.__doc__)
    exp.add_argument("config")
    exp.add_argument("--out-dir", default=str(Config.RESULTS_DIR))
    exp.add_argument("--prefix", default="experiment")
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except ValidationError as e:
        log.error(f"Validation error: {e}")
        return EXIT_VALIDATION
    except CapillaryError as e:
        log.error(f"{type(e).__name__}: {e}")
        return EXIT_RUNTIME
    except Exception as e:
        log.error(f"Unexpected error: {e}", exc_info=True)
        return EXIT_RUNTIME
