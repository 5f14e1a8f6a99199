"""Trace files, campaign manifests and flat config files.

Trace file (``midori-cpa/1``), UTF-8 text::

    # format: midori-cpa/1
    # num_traces: 300
    # samples_per_trace: 100
    # key_known: 1
    # note: free text, single line
    0123456789ABCDEF,FEDCBA9876543210,0.5,-1.25,...

Header lines start with ``#`` and hold ``name: value`` pairs; ``format``,
``num_traces`` and ``samples_per_trace`` are required. Each data row is the
plaintext and ciphertext as 16 hex digits followed by ``samples_per_trace``
samples in shortest round-trip decimal form (``repr`` of a float).

The manifest is a JSON document next to the trace file (``<stem>.manifest.json``)
recording the leakage config, the trace file name and, for simulations, the
true key.

Config files are flat ``key = value`` lines with ``#`` comments.
"""

from __future__ import annotations

import configparser
import dataclasses
import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cipher import MasterKey
from .errors import (
    BadHeaderError,
    BadHexError,
    ConfigError,
    ConfigValueError,
    ManifestError,
    MissingFileError,
    NonNumericSampleError,
    RaggedRowError,
    TraceFileError,
    UnknownKeyError,
)
from .leakage import LeakageConfig, TraceSet

FORMAT_VERSION = "midori-cpa/1"
MANIFEST_VERSION = "midori-cpa-manifest/1"

_HEXDIGITS = frozenset("0123456789abcdefABCDEF")


@dataclass(frozen=True)
class TraceFileHeader:
    format_version: str
    num_traces: int
    samples_per_trace: int
    sampling_note: str = ""
    key_known_flag: bool = False


@dataclass(frozen=True)
class RunConfig:
    """Leakage settings plus the attack-side campaign size."""

    leakage: LeakageConfig
    num_traces: int = 300


@dataclass(frozen=True)
class CampaignManifest:
    config: LeakageConfig | None
    trace_file: Path
    true_key: str | None = None


def atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


# -- trace files -----------------------------------------------------------

def format_traceset(ts: TraceSet, note: str = "") -> str:
    note = " ".join(note.split())
    lines = [
        f"# format: {FORMAT_VERSION}",
        f"# num_traces: {ts.num_traces}",
        f"# samples_per_trace: {ts.samples_per_trace}",
        f"# key_known: {int(ts.key_known is not None)}",
        f"# note: {note}",
    ]
    for pt, ct, row in zip(ts.plaintexts.tolist(), ts.ciphertexts.tolist(), ts.samples.tolist()):
        lines.append(f"{pt:016X},{ct:016X}," + ",".join(map(repr, row)))
    return "\n".join(lines) + "\n"


def write_traceset(ts: TraceSet, path: str | Path, note: str = "") -> Path:
    path = Path(path)
    try:
        atomic_write_text(path, format_traceset(ts, note))
    except OSError as exc:
        raise OSError(f"cannot write trace file {path}: {exc}") from exc
    return path


def _parse_header(path: Path, lines: list[str]) -> tuple[TraceFileHeader, int]:
    fields: dict[str, str] = {}
    n = 0
    while n < len(lines) and lines[n].startswith("#"):
        body = lines[n][1:].strip()
        if body:
            name, sep, value = body.partition(":")
            if not sep:
                raise BadHeaderError(path, n + 1, f"header line is not 'name: value': {lines[n]!r}")
            fields[name.strip()] = value.strip()
        n += 1

    for required in ("format", "num_traces", "samples_per_trace"):
        if required not in fields:
            raise BadHeaderError(path, None, f"missing header field {required!r}")
    if fields["format"] != FORMAT_VERSION:
        raise BadHeaderError(path, None, f"unsupported format {fields['format']!r}")
    try:
        d = int(fields["num_traces"])
        t = int(fields["samples_per_trace"])
        key_known = bool(int(fields.get("key_known", "0")))
    except ValueError:
        raise BadHeaderError(path, None, "non-integer header value") from None
    if d < 1 or t < 1:
        raise BadHeaderError(path, None, f"invalid dimensions D={d}, T={t}")
    header = TraceFileHeader(fields["format"], d, t, fields.get("note", ""), key_known)
    return header, n


def _parse_hex_field(path: Path, lineno: int, text: str, what: str) -> int:
    if len(text) != 16 or not set(text) <= _HEXDIGITS:
        raise BadHexError(path, lineno, f"{what} must be 16 hex digits, got {text!r}")
    return int(text, 16)


def parse_traceset(text: str, path: str | Path = "<string>") -> tuple[TraceSet, TraceFileHeader]:
    path = Path(path)
    lines = text.splitlines()
    header, first = _parse_header(path, lines)
    t = header.samples_per_trace

    rows = [(i + 1, line) for i, line in enumerate(lines[first:], start=first) if line.strip()]
    if len(rows) != header.num_traces:
        raise BadHeaderError(
            path, None, f"header declares {header.num_traces} traces but file has {len(rows)} rows")

    pts = np.empty(len(rows), dtype=np.uint64)
    cts = np.empty(len(rows), dtype=np.uint64)
    samples: list[list[float]] = []
    for n, (lineno, line) in enumerate(rows):
        if line.startswith("#"):
            raise BadHeaderError(path, lineno, "header line after data rows")
        parts = line.split(",")
        if len(parts) != t + 2:
            raise RaggedRowError(
                path, lineno, f"expected {t} samples, found {max(len(parts) - 2, 0)}")
        pts[n] = _parse_hex_field(path, lineno, parts[0].strip(), "plaintext")
        cts[n] = _parse_hex_field(path, lineno, parts[1].strip(), "ciphertext")
        row = []
        for j, field in enumerate(parts[2:]):
            try:
                v = float(field)
            except ValueError:
                raise NonNumericSampleError(
                    path, lineno, f"sample {j} is not a number: {field.strip()!r}") from None
            if not math.isfinite(v):
                raise NonNumericSampleError(path, lineno, f"sample {j} is not finite: {field.strip()!r}")
            row.append(v)
        samples.append(row)
    samples_arr = np.array(samples, dtype=np.float64).reshape(len(rows), t)
    return TraceSet(pts, cts, samples_arr), header


def read_traceset(path: str | Path, manifest: CampaignManifest | None = None) -> TraceSet:
    """Load a trace file; ``manifest`` (if given) supplies config and key."""
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(path)
    try:
        text = path.read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise BadHeaderError(path, None, f"not UTF-8 text ({exc.reason})") from None
    ts, _ = parse_traceset(text, path)
    if manifest is None:
        return ts
    config = manifest.config
    if config is not None and config.samples_per_trace != ts.samples_per_trace:
        config = None
    key = MasterKey.from_hex(manifest.true_key) if manifest.true_key else None
    return TraceSet(ts.plaintexts, ts.ciphertexts, ts.samples, config, key)


# -- manifests -------------------------------------------------------------

def manifest_path_for(trace_path: str | Path) -> Path:
    trace_path = Path(trace_path)
    return trace_path.with_name(trace_path.stem + ".manifest.json")


def write_manifest(manifest: CampaignManifest, path: str | Path, num_traces: int) -> Path:
    path = Path(path)
    doc = {
        "format": MANIFEST_VERSION,
        "trace_file": manifest.trace_file.name,
        "num_traces": num_traces,
        "config": dataclasses.asdict(manifest.config) if manifest.config else None,
        "true_key": manifest.true_key,
    }
    atomic_write_text(path, json.dumps(doc, indent=2) + "\n")
    return path


def read_manifest(path: str | Path) -> CampaignManifest:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        if doc.get("format") != MANIFEST_VERSION:
            raise ManifestError(f"{path}: unsupported manifest format {doc.get('format')!r}")
        config = LeakageConfig(**doc["config"]) if doc.get("config") else None
        true_key = doc.get("true_key")
        if true_key is not None:
            MasterKey.from_hex(true_key)
        trace_file = path.parent / doc["trace_file"]
    except (ValueError, KeyError, TypeError) as exc:
        raise ManifestError(f"{path}: invalid manifest: {exc}") from exc
    if not trace_file.is_file():
        raise ManifestError(f"{path}: referenced trace file {trace_file} does not exist")
    return CampaignManifest(config, trace_file, true_key)


# -- config files ----------------------------------------------------------

_INT_KEYS = ("samples_per_trace", "poi_offset", "poi_stride", "repeats", "seed", "num_traces")
_FLOAT_KEYS = ("noise_sigma", "baseline")
CONFIG_KEYS = _FLOAT_KEYS + _INT_KEYS


def _parse_int(raw: str) -> int:
    raw = raw.strip()
    if raw.lower().startswith("0x"):
        return int(raw, 16)
    return int(raw)


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    parser = configparser.ConfigParser(
        delimiters=("=",), comment_prefixes=("#",), inline_comment_prefixes=("#",),
        interpolation=None)
    parser.optionxform = str  # keep key case
    try:
        parser.read_string("[config]\n" + text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None

    values: dict[str, float | int] = {}
    for name, raw in parser["config"].items():
        if name not in CONFIG_KEYS:
            raise UnknownKeyError(
                f"{source}: unknown key {name!r}; expected one of {', '.join(CONFIG_KEYS)}")
        try:
            values[name] = float(raw) if name in _FLOAT_KEYS else _parse_int(raw)
        except ValueError:
            raise ConfigValueError(f"{source}: {name} = {raw!r} is not a valid number") from None

    num_traces = int(values.pop("num_traces", RunConfig.num_traces))
    if num_traces < 1:
        raise ConfigValueError(f"{source}: num_traces must be >= 1, got {num_traces}")
    try:
        leakage = LeakageConfig(**values)
    except ConfigError as exc:
        raise type(exc)(f"{source}: {exc}") from None
    return RunConfig(leakage, num_traces)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError:
        raise ConfigError(f"{path}: not UTF-8 text") from None
    return parse_config(text, str(path))


def format_config(cfg: RunConfig) -> str:
    items = dataclasses.asdict(cfg.leakage) | {"num_traces": cfg.num_traces}
    return "".join(f"{k} = {v!r}\n" for k, v in items.items())


__all__ = [
    "CONFIG_KEYS", "CampaignManifest", "FORMAT_VERSION", "RunConfig", "TraceFileError",
    "TraceFileHeader", "format_config", "format_traceset", "load_config",
    "manifest_path_for", "parse_config", "parse_traceset", "read_manifest",
    "read_traceset", "write_manifest", "write_traceset",
]
