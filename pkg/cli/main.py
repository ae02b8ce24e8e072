# cli/main.py
"""
Command-line surface: match, eval, bench, synth, describe.
Exit codes: 0 success, 2 input or configuration error, 3 evaluation error.
"""

import argparse
import sys
from pathlib import Path
from typing import Dict, List, Optional

from core.descriptor import load_image_dir, similarity_matrix
from core.exceptions import VPRError
from core.metrics import summary_lines
from core.models import (
    DescriptorParams, RunConfig, SeqParams, SicParams, SynthConfig, TechniqueInput, validated
)
from core.services import MatchingService
from core.simdata import save_ground_truth, save_matrix
from core.synth import generate, generate_technique_set, write_config_echo
from utils.config import Config, load_settings
from utils.logger import logger


def _sizes(value: str) -> List[int]:
    try:
        return [int(v) for v in value.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"sizes must be comma-separated integers, got '{value}'")


def _add_sic_flags(parser: argparse.ArgumentParser):
    group = parser.add_argument_group("SIC")
    group.add_argument('--k', type=int, help=f"candidates per query (default {Config.DEFAULT_K})")
    group.add_argument('--f', type=int, help=f"past queries in theta (default {Config.DEFAULT_F})")
    group.add_argument('--w', type=int, help=f"window half-width (default {Config.DEFAULT_W})")


def _add_seq_flags(parser: argparse.ArgumentParser):
    group = parser.add_argument_group("SeqSLAM-style baseline")
    group.add_argument('--ds', type=int, help=f"trajectory length (default {Config.DEFAULT_DS})")
    group.add_argument('--vmin', type=float)
    group.add_argument('--vmax', type=float)
    group.add_argument('--vstep', type=float)
    group.add_argument('--rwindow', type=int, help="contrast enhancement half-width")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vpr", description="Sequential consistency place matching")
    parser.add_argument('--config', help=f"TOML settings file (default ./{Config.DEFAULT_TOML} if present)")
    parser.add_argument('--quiet', action='store_true', help="suppress log output")
    sub = parser.add_subparsers(dest='command', required=True)

    match = sub.add_parser('match', help="match query frames against the reference map")
    match.add_argument('--technique', action='append', required=True, metavar='ID=PATH[:distance]',
                       help="technique matrix file (.csv, .simm); repeat for music mode")
    match.add_argument('--mode', choices=['sic', 'music', 'seqslam', 'argmax'], default='music')
    _add_sic_flags(match)
    _add_seq_flags(match)
    match.add_argument('--allowance', type=int)
    match.add_argument('--gt', help="ground truth CSV; when given the run is also evaluated")
    match.add_argument('--out', default='.', help="output directory")
    match.add_argument('--stream', action='store_true', help="process rows one at a time")
    match.add_argument('--no-scale', action='store_true', help="skip per-row z-score scaling")
    match.add_argument('--confidence', choices=['theta', 'score'], default='theta')
    match.add_argument('--seed', type=int, default=0, help="recorded in run.toml; matching itself is deterministic")
    match.add_argument('--svg', action='store_true')

    ev = sub.add_parser('eval', help="precision-recall evaluation of a decisions file")
    ev.add_argument('--decisions', required=True)
    ev.add_argument('--gt', required=True)
    ev.add_argument('--allowance', type=int)
    ev.add_argument('--timing', help="per-frame timing CSV written by match")
    ev.add_argument('--refs', type=int, help="reference count, enables ground truth range checks")
    ev.add_argument('--out', default='.')
    ev.add_argument('--svg', action='store_true')

    bench = sub.add_parser('bench', help="per-frame matching time against map size")
    bench.add_argument('--sizes', type=_sizes, default=Config.DEFAULT_BENCH_SIZES,
                       help="comma-separated map sizes")
    bench.add_argument('--queries', type=int, default=Config.DEFAULT_BENCH_QUERIES)
    _add_sic_flags(bench)
    _add_seq_flags(bench)
    bench.add_argument('--seed', type=int, default=0)
    bench.add_argument('--out', default='.')
    bench.add_argument('--svg', action='store_true')

    synth = sub.add_parser('synth', help="write a synthetic matrix with ground truth")
    synth.add_argument('--queries', type=int, required=True)
    synth.add_argument('--refs', type=int, required=True)
    synth.add_argument('--signal', type=float, default=1.0)
    synth.add_argument('--noise', type=float, default=0.5)
    synth.add_argument('--dropout', type=float, default=0.0)
    synth.add_argument('--drift', type=int, default=0)
    synth.add_argument('--seed', type=int, default=0)
    synth.add_argument('--techniques', type=int, default=1, help="techniques sharing one trajectory")
    synth.add_argument('--format', choices=['simm', 'csv'], default='simm')
    synth.add_argument('--out', default='.')

    describe = sub.add_parser('describe', help="similarity matrix from two PGM image folders")
    describe.add_argument('--query-dir', required=True)
    describe.add_argument('--ref-dir', help="defaults to the query folder")
    describe.add_argument('--grid-w', type=int, default=Config.DEFAULT_GRID_W)
    describe.add_argument('--grid-h', type=int, default=Config.DEFAULT_GRID_H)
    describe.add_argument('--patch', type=int, default=Config.DEFAULT_PATCH)
    describe.add_argument('--format', choices=['simm', 'csv'], default='simm')
    describe.add_argument('--out', default='.')
    return parser


def _pick(args: argparse.Namespace, flag: str, settings: Dict, key: str):
    value = getattr(args, flag, None)
    return settings[key] if value is None else value


def _sic_params(args, settings) -> SicParams:
    return validated(SicParams, k=_pick(args, 'k', settings, 'k'), f=_pick(args, 'f', settings, 'f'),
                     w=_pick(args, 'w', settings, 'w'))


def _seq_params(args, settings) -> SeqParams:
    return validated(
        SeqParams,
        ds=_pick(args, 'ds', settings, 'ds'),
        v_min=_pick(args, 'vmin', settings, 'vmin'),
        v_max=_pick(args, 'vmax', settings, 'vmax'),
        v_step=_pick(args, 'vstep', settings, 'vstep'),
        r_window=_pick(args, 'rwindow', settings, 'rwindow'),
    )


def cmd_match(args, settings, service: MatchingService) -> int:
    config = validated(
        RunConfig,
        techniques=[TechniqueInput.parse(text) for text in args.technique],
        mode=args.mode,
        sic=_sic_params(args, settings),
        seq=_seq_params(args, settings),
        allowance=_pick(args, 'allowance', settings, 'allowance'),
        gt_path=args.gt,
        out_dir=args.out,
        stream=args.stream,
        scale=not args.no_scale,
        confidence=args.confidence,
        svg=args.svg,
        seed=args.seed,
    )
    outcome = service.run(config)
    stats = outcome['processing_stats']
    print(f"matched {stats['queries']} queries ({config.mode}) -> {', '.join(outcome['files'])}")
    if stats.get('selection_shares'):
        for tid, share in stats['selection_shares'].items():
            print(f"selected {tid}={share!r}")
    if 'report' in outcome:
        print(f"auc={outcome['report'].auc!r} accuracy={outcome['report'].top1_accuracy!r}")
    return 0


def cmd_eval(args, settings, service: MatchingService) -> int:
    outcome = service.evaluate_files(
        args.decisions, args.gt, _pick(args, 'allowance', settings, 'allowance'), args.out,
        timing_path=args.timing, n_refs=args.refs, svg=args.svg,
    )
    for line in summary_lines(outcome['report']):
        print(line)
    return 0


def cmd_bench(args, settings, service: MatchingService) -> int:
    rows = service.run_bench(args.sizes, args.queries, _sic_params(args, settings),
                             _seq_params(args, settings), args.seed)
    service.write_bench(rows, args.out, args.svg)
    print("matcher,stage,map_size,ms_per_frame")
    for row in rows:
        print(f"{row.matcher},{row.stage},{row.map_size},{row.ms_per_frame:.4f}")
    return 0


def cmd_synth(args, settings, service: MatchingService) -> int:
    config = validated(SynthConfig, q_count=args.queries, n_count=args.refs, signal=args.signal,
                       noise_sigma=args.noise, dropout=args.dropout, drift_amp=args.drift, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if args.techniques > 1:
        techniques, gt = generate_technique_set(config, args.techniques)
        for tid in techniques.ids:
            name = f"{tid}.{args.format}"
            save_matrix(techniques.matrix(tid), out / name)
            written.append(name)
    else:
        matrix, gt = generate(config)
        name = f"matrix.{args.format}"
        save_matrix(matrix, out / name)
        written.append(name)
    save_ground_truth(gt, out / 'gt.csv')
    write_config_echo(config, out / 'synth.toml')
    print(f"wrote {', '.join(written + ['gt.csv', 'synth.toml'])} to {out}")
    return 0


def cmd_describe(args, settings, service: MatchingService) -> int:
    params = validated(DescriptorParams, grid_w=args.grid_w, grid_h=args.grid_h, patch=args.patch)
    queries = load_image_dir(args.query_dir)
    refs = queries if not args.ref_dir else load_image_dir(args.ref_dir)
    matrix = similarity_matrix(queries, refs, params)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"similarity.{args.format}"
    save_matrix(matrix, path)
    print(f"wrote {matrix.rows}x{matrix.cols} similarity matrix to {path}")
    return 0


COMMANDS = {
    'match': cmd_match,
    'eval': cmd_eval,
    'bench': cmd_bench,
    'synth': cmd_synth,
    'describe': cmd_describe,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logger.enabled = not args.quiet

    try:
        settings = load_settings(args.config)
        logger.set_level(settings['log_level'])
        return COMMANDS[args.command](args, settings, MatchingService(settings))
    except VPRError as e:
        logger.error(str(e), "CLI")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
