"""Command-line front end.

Exit codes: 0 when the command completed, 2 for usage errors, 1 for runtime
and I/O errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .cipher import (
    ALPHA0,
    MasterKey,
    block_to_state,
    decrypt,
    encrypt,
    format_block,
    format_state,
    key_schedule,
    parse_hex,
)
from .cpa import (
    NUM_CELLS,
    attack_full,
    attack_round1,
    build_hypotheses_round1,
    build_hypotheses_round2,
    pearson,
    true_cell_values,
)
from .errors import MidoriCpaError
from .experiments import run_sweep
from .leakage import simulate_campaign
from .trace_io import (
    CampaignManifest,
    atomic_write_text,
    load_config,
    manifest_path_for,
    read_manifest,
    read_traceset,
    write_manifest,
    write_traceset,
)


# -- argument types --------------------------------------------------------

def _hex_arg(width: int):
    def parse(text: str) -> int:
        try:
            return parse_hex(text, width)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    parse.__name__ = f"hex{width}"
    return parse


def _key_arg(text: str) -> MasterKey:
    return MasterKey.from_int(_hex_arg(32)(text))


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _grid_arg(text: str) -> list[int]:
    parts = [p for p in text.replace(" ", "").split(",") if p]
    if not parts:
        raise argparse.ArgumentTypeError("empty grid")
    return [_positive_int(p) for p in parts]


def _alpha_table_arg(text: str) -> str:
    if text != "builtin":
        raise argparse.ArgumentTypeError("only 'builtin' is available")
    return text


def _nibble_str(v: int) -> str:
    return f"{v:2d} ({v:X})"


# -- commands --------------------------------------------------------------

def cmd_encrypt(args, out) -> int:
    print(format_block(encrypt(args.pt, args.key)), file=out)
    return 0


def cmd_decrypt(args, out) -> int:
    print(format_block(decrypt(args.ct, args.key)), file=out)
    return 0


def cmd_keysched(args, out) -> int:
    ks = key_schedule(args.key)
    print(f"WK    {format_state(ks.wk)}", file=out)
    for r, rk in enumerate(ks.round_keys):
        print(f"RK{r:<3d} {format_state(rk)}", file=out)
    return 0


def cmd_simulate(args, out) -> int:
    run = load_config(args.config)
    ts = simulate_campaign(run.num_traces, args.key, run.leakage)
    trace_path = Path(args.out)
    write_traceset(ts, trace_path, note=f"simulated; noise_sigma={run.leakage.noise_sigma}"
                                        f" repeats={run.leakage.repeats}")
    manifest = CampaignManifest(run.leakage, trace_path, args.key.hex())
    mpath = write_manifest(manifest, manifest_path_for(trace_path), ts.num_traces)
    print(f"wrote {ts.num_traces} traces x {ts.samples_per_trace} samples to {trace_path}", file=out)
    print(f"wrote manifest {mpath}", file=out)
    return 0


def _load_for_attack(args):
    manifest = None
    mpath = Path(args.manifest) if args.manifest else manifest_path_for(args.traces)
    if args.manifest or mpath.is_file():
        manifest = read_manifest(mpath)
    return read_traceset(args.traces, manifest)


def cmd_attack(args, out) -> int:
    ts = _load_for_attack(args)
    alpha0 = block_to_state(args.alpha0) if args.alpha0 is not None else ALPHA0
    res = attack_full(ts, alpha0, workers=args.workers)

    print(f"traces   {ts.num_traces} x {ts.samples_per_trace}", file=out)
    print(f"WK       {format_state(res.wk)}", file=out)
    print(f"RK0      {format_state(res.rk0)}", file=out)
    print(f"k0       {format_block(res.k0)}", file=out)
    print(f"k1       {format_block(res.k1)}", file=out)
    print(f"key      {res.key.hex()}", file=out)
    print(f"verified {'yes' if res.verified else 'no'}"
          f" (re-encryption of {ts.num_traces} recorded plaintexts)", file=out)

    truth = true_cell_values(ts.key_known) if ts.key_known else None
    header = "round cell  nibble    peak|r|   sample"
    print(header + ("  true_rank" if truth else ""), file=out)
    for n, c in enumerate(res.per_cell):
        line = (f"{c.round:5d} {c.cell:4d}  {_nibble_str(c.recovered_nibble)}"
                f"  {c.peak_abs_correlation:9.6f}  {c.peak_sample:6d}")
        if truth:
            line += f"  {c.rank_of(truth[n]):9d}"
        if c.low_confidence:
            line += "  low-confidence"
        print(line, file=out)
    if ts.key_known is not None:
        ok = res.key == ts.key_known
        print(f"verdict  {'SUCCESS' if ok else 'FAILURE'} (manifest key {ts.key_known.hex()})",
              file=out)
    return 0


def cmd_sweep(args, out) -> int:
    run = load_config(args.config)
    rows = run_sweep(run.leakage, args.key, args.d_grid, args.trials)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["num_traces", "trials", "successes", "success_rate", "std_error", "mean_rank"])
    for r in rows:
        w.writerow([r.num_traces, r.trials, r.successes, repr(r.success_rate),
                    repr(r.std_error), repr(r.mean_rank)])
    atomic_write_text(Path(args.out), buf.getvalue())
    for r in rows:
        print(f"D={r.num_traces:6d}  success={r.success_rate:.3f} ({r.successes}/{r.trials})"
              f"  mean_rank={r.mean_rank:.3f}", file=out)
    return 0


def cmd_export_corr(args, out) -> int:
    ts = _load_for_attack(args)
    if args.round == 1:
        h = build_hypotheses_round1(ts, args.cell)
    else:
        wk = block_to_state(args.wk) if args.wk is not None else attack_round1(ts).key_state
        h = build_hypotheses_round2(ts, wk, args.cell)
    peaks, where = pearson(h, ts).peaks()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["guess", "guess_hex", "peak_abs_corr", "peak_sample"])
    for g in range(16):
        w.writerow([g, f"{g:X}", repr(float(peaks[g])), int(where[g])])
    atomic_write_text(Path(args.out), buf.getvalue())
    best = int(peaks.argmax())
    print(f"round {args.round} cell {args.cell}: best guess {_nibble_str(best)}"
          f" peak |r| = {peaks[best]:.6f}", file=out)
    return 0


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="midori-cpa",
        description="Midori64 cipher, Hamming-weight trace simulator and two-stage CPA.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("encrypt", help="encrypt one block")
    s.add_argument("--key", type=_key_arg, required=True, help="32 hex digits")
    s.add_argument("--pt", type=_hex_arg(16), required=True, help="16 hex digits")
    s.set_defaults(func=cmd_encrypt)

    s = sub.add_parser("decrypt", help="decrypt one block")
    s.add_argument("--key", type=_key_arg, required=True)
    s.add_argument("--ct", type=_hex_arg(16), required=True)
    s.set_defaults(func=cmd_decrypt)

    s = sub.add_parser("keysched", help="print WK and the 15 round keys")
    s.add_argument("--key", type=_key_arg, required=True)
    s.set_defaults(func=cmd_keysched)

    s = sub.add_parser("simulate", help="simulate a trace campaign")
    s.add_argument("--config", required=True)
    s.add_argument("--key", type=_key_arg, required=True)
    s.add_argument("--out", required=True, help="trace CSV; manifest goes next to it")
    s.set_defaults(func=cmd_simulate)

    def traces_args(s):
        s.add_argument("--traces", required=True)
        s.add_argument("--manifest", help="default: <traces stem>.manifest.json if present")

    s = sub.add_parser("attack", help="recover the master key from a trace file")
    traces_args(s)
    alpha = s.add_mutually_exclusive_group()
    alpha.add_argument("--alpha0", type=_hex_arg(16), help="alpha_0 as 16 hex digits")
    alpha.add_argument("--alpha-table", type=_alpha_table_arg, help="round-constant table (default: builtin)")
    s.add_argument("--workers", type=_positive_int, default=1)
    s.set_defaults(func=cmd_attack)

    s = sub.add_parser("sweep", help="success rate vs. number of traces")
    s.add_argument("--config", required=True)
    s.add_argument("--key", type=_key_arg, required=True)
    s.add_argument("--d-grid", type=_grid_arg, required=True, help="e.g. 50,100,200,300")
    s.add_argument("--trials", type=_positive_int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("export-corr", help="per-guess peak |r| for one cell")
    traces_args(s)
    s.add_argument("--cell", type=int, choices=range(NUM_CELLS), required=True, metavar="0..15")
    s.add_argument("--round", type=int, choices=(1, 2), default=1)
    s.add_argument("--wk", type=_hex_arg(16), help="round 2 only; default: recover with stage 1")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_export_corr)
    return p


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except (MidoriCpaError, OSError) as exc:
        print(f"midori-cpa {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
