"""Command-line front end.

Subcommands: run (one protocol/cycle point), sweep (protocol x cycles grid),
table (decoder lookup-table dump), decode (offline decoding of recorded
syndrome streams), latency (control-latency budgets and timelines), and
parity (single-cycle parity distributions).

Exit codes: 0 success, 2 usage or configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys

import yaml

from .decoder import (
    MAX_ROUNDS,
    DecoderWeights,
    SyndromeHistory,
    build_lookup_table,
    pauli_frame_update,
    parse_syndrome_line,
)
from .device import (
    PLACEHOLDER_NOTES,
    PRESETS,
    ConfigError,
    DeviceParams,
    params_from_dict,
)
from .latency import (
    DEFAULT_PIPELINE,
    PipelineStep,
    build_timeline,
    processor_roundtrip,
    protocol_latency,
    timeline_to_csv,
)
from .protocols import (
    CoherentErrorModel,
    ExperimentConfig,
    ProtocolKind,
    parity_distribution,
    run_experiment,
)

RESULT_HEADER = ("protocol", "N", "K", "seed", "d1_mean", "d2_mean", "d3_mean",
                 "m_mean", "m_stderr")

_EXPERIMENT_KEYS = {
    "protocol": "dec",
    "n_cycles": 4,
    "n_trajectories": 10_000,
    "master_seed": 0,
    "initial_state": "111",
    "error_model": "E2",
    "noisy_dec_correction": False,
    "coherent_rec_correction": False,
    "workers": 1,
}


def _coerce(value: str):
    text = value.strip()
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def _parse_cycles(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part.lstrip("-"):
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise ConfigError(f"cycles: no cycle counts in {text!r}")
    return out


def _parse_steps(text: str) -> tuple[PipelineStep, ...]:
    values = [float(v) for v in text.split(",") if v.strip()]
    if not values:
        raise ConfigError(f"steps: no durations in {text!r}")
    if len(values) == len(DEFAULT_PIPELINE):
        return tuple(
            PipelineStep(d.name, v) for d, v in zip(DEFAULT_PIPELINE, values)
        )
    return tuple(PipelineStep(f"step{i + 1}", v) for i, v in enumerate(values))


class ResolvedConfig:
    def __init__(self, params: DeviceParams, experiment: dict, weights: DecoderWeights):
        self.params = params
        self.experiment = experiment
        self.weights = weights

    def experiment_config(self, protocol: ProtocolKind, n_cycles: int) -> ExperimentConfig:
        e = self.experiment
        return ExperimentConfig(
            params=self.params,
            protocol=protocol,
            n_cycles=n_cycles,
            n_trajectories=int(e["n_trajectories"]),
            master_seed=int(e["master_seed"]),
            initial_state=str(e["initial_state"]),
            error_model=CoherentErrorModel(str(e["error_model"]).upper()),
            weights=self.weights,
            noisy_dec_correction=bool(e["noisy_dec_correction"]),
            coherent_rec_correction=bool(e["coherent_rec_correction"]),
        )


def resolve_config(args) -> ResolvedConfig:
    preset = getattr(args, "preset", "table-s1")
    if preset not in PRESETS:
        raise ConfigError(f"preset: unknown preset {preset!r}")
    sections = {"device": {}, "experiment": dict(_EXPERIMENT_KEYS), "weights": {}}
    config_path = getattr(args, "config", None)
    if config_path:
        with open(config_path) as fp:
            loaded = yaml.safe_load(fp) or {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config: {config_path} must hold a mapping")
        for section, content in loaded.items():
            if section not in sections:
                raise ConfigError(f"config: unknown section {section!r}")
            if not isinstance(content, dict):
                raise ConfigError(f"config: section {section!r} must be a mapping")
            if section == "experiment":
                for key in content:
                    if key not in _EXPERIMENT_KEYS:
                        raise ConfigError(f"experiment.{key}: unknown key")
            sections[section].update(content)
    for item in getattr(args, "set", None) or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        path, value = item.split("=", 1)
        parts = path.split(".")
        if len(parts) < 2 or parts[0] not in sections:
            raise ConfigError(f"override {item!r} must start with device., experiment. or weights.")
        section = sections[parts[0]]
        if parts[0] == "experiment" and parts[1] not in _EXPERIMENT_KEYS:
            raise ConfigError(f"experiment.{parts[1]}: unknown key")
        target = section
        for key in parts[1:-1]:
            target = target.setdefault(key, {})
        target[parts[-1]] = _coerce(value)

    for flag, key in (
        ("seed", "master_seed"),
        ("trajectories", "n_trajectories"),
        ("workers", "workers"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            sections["experiment"][key] = value

    params = params_from_dict(sections["device"], base=PRESETS[preset]())
    w = sections["weights"]
    weights = DecoderWeights(float(w.get("w_data", 1.0)), float(w.get("w_meas", 1.0)))
    if weights.w_data < 0 or weights.w_meas < 0 or weights == (0.0, 0.0):
        raise ConfigError("weights: must be nonnegative and not both zero")
    return ResolvedConfig(params, sections["experiment"], weights)


def _show_config(resolved: ResolvedConfig, fp) -> None:
    device = resolved.params.to_dict()
    fp.write("device:\n")
    for key, value in device.items():
        note = PLACEHOLDER_NOTES.get(key)
        suffix = f"  # {note}" if note else ""
        if isinstance(value, dict):
            fp.write(f"  {key}:{suffix}\n")
            for sub, v in sorted(value.items()):
                fp.write(f"    {sub}: {v}\n")
        else:
            fp.write(f"  {key}: {value}{suffix}\n")
    fp.write("experiment:\n")
    for key, value in resolved.experiment.items():
        fp.write(f"  {key}: {value}\n")
    fp.write("weights:\n")
    fp.write(f"  w_data: {resolved.weights.w_data}\n")
    fp.write(f"  w_meas: {resolved.weights.w_meas}\n")


def _write_atomic(path: str, text: str) -> None:
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w") as fp:
        fp.write(text)
    os.replace(tmp, path)


def _emit(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        _write_atomic(path, text)


def _result_rows(resolved: ResolvedConfig, protocols, cycles) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(RESULT_HEADER)
    workers = int(resolved.experiment.get("workers", 1))
    for protocol in protocols:
        for n in cycles:
            config = resolved.experiment_config(protocol, n)
            r = run_experiment(config, workers=workers)
            writer.writerow(
                [
                    r.protocol.value,
                    r.n_cycles,
                    r.n_trajectories,
                    r.master_seed,
                    repr(r.d1_mean),
                    repr(r.d2_mean),
                    repr(r.d3_mean),
                    repr(r.m_mean),
                    repr(r.m_stderr),
                ]
            )
    return buf.getvalue()


def cmd_run(args) -> int:
    resolved = resolve_config(args)
    if args.show_config:
        _show_config(resolved, sys.stdout)
        return 0
    protocol = ProtocolKind.parse(args.protocol or str(resolved.experiment["protocol"]))
    n = args.cycles if args.cycles is not None else int(resolved.experiment["n_cycles"])
    _emit(args.output, _result_rows(resolved, [protocol], [n]))
    return 0


def cmd_sweep(args) -> int:
    resolved = resolve_config(args)
    if args.show_config:
        _show_config(resolved, sys.stdout)
        return 0
    if args.protocols.strip().lower() == "all":
        protocols = list(ProtocolKind)
    else:
        protocols = [ProtocolKind.parse(p) for p in args.protocols.split(",") if p.strip()]
    if not protocols:
        raise ConfigError("protocols: none requested")
    cycles = _parse_cycles(args.cycles)
    for n in cycles:
        if not 1 <= n <= MAX_ROUNDS:
            raise ConfigError(f"cycles: {n} outside the supported 1..{MAX_ROUNDS} range")
    _emit(args.output, _result_rows(resolved, protocols, cycles))
    return 0


def cmd_table(args) -> int:
    if not 1 <= args.cycles <= MAX_ROUNDS:
        raise ConfigError(
            f"cycles: {args.cycles} outside the lookup table's supported 1..{MAX_ROUNDS} cycles"
        )
    resolved = resolve_config(args)
    table = build_lookup_table(args.cycles, reset_mode=args.reset, weights=resolved.weights)
    _emit(args.output, "".join(f"{line}\n" for line in table.dump_lines()))
    return 0


def cmd_decode(args) -> int:
    resolved = resolve_config(args)
    if args.input == "-":
        lines = sys.stdin.read().splitlines()
    else:
        with open(args.input) as fp:
            lines = fp.read().splitlines()
    tables: dict[int, object] = {}
    out = io.StringIO()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rounds, data_bits = parse_syndrome_line(line)
            if args.cycles is not None and len(rounds) != args.cycles:
                raise ValueError(
                    f"expected {args.cycles} rounds, found {len(rounds)}"
                )
            n = len(rounds)
            if n not in tables:
                tables[n] = build_lookup_table(n, reset_mode=args.reset,
                                               weights=resolved.weights)
            correction = tables[n].decode(SyndromeHistory(rounds, args.reset))
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from exc
        text = f"{correction.c1}{correction.c2}{correction.c3}"
        if data_bits is not None:
            updated = pauli_frame_update(data_bits, correction)
            text += " " + "".join(str(b) for b in updated)
        out.write(text + "\n")
    _emit(args.output, out.getvalue())
    return 0


def cmd_latency(args) -> int:
    steps = _parse_steps(args.steps) if args.steps else None
    out = io.StringIO()
    out.write(f"processor_roundtrip_ns: {processor_roundtrip(steps):g}\n")
    out.write("protocol,per_cycle_ns,fixed_ns\n")
    for protocol in ProtocolKind:
        budget = protocol_latency(protocol, steps=steps)
        out.write(f"{protocol.value},{budget.per_cycle_ns:g},{budget.fixed_ns}\n")
    sys.stdout.write(out.getvalue())
    if args.timeline:
        resolved = resolve_config(args)
        protocol = ProtocolKind.parse(args.timeline)
        n = args.cycles if args.cycles is not None else 2
        events = build_timeline(protocol, n, resolved.params, steps)
        if args.timeline_csv:
            buf = io.StringIO()
            timeline_to_csv(events, buf)
            _write_atomic(args.timeline_csv, buf.getvalue())
        else:
            timeline_to_csv(events, sys.stdout)
    return 0


def cmd_parity(args) -> int:
    resolved = resolve_config(args)
    states = (
        [f"{i:03b}" for i in range(8)]
        if args.initial_state.strip().lower() == "all"
        else [s.strip() for s in args.initial_state.split(",")]
    )
    e = resolved.experiment
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["initial_state", "K", "seed", "p_ee", "p_eo", "p_oe", "p_oo"])
    for state in states:
        dist = parity_distribution(
            state,
            resolved.params,
            CoherentErrorModel(str(e["error_model"]).upper()),
            int(e["master_seed"]),
            int(e["n_trajectories"]),
        )
        writer.writerow([state, e["n_trajectories"], e["master_seed"]] +
                        [repr(p) for p in dist])
    _emit(args.output, buf.getvalue())
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML config with device/experiment/weights sections")
    parser.add_argument("--preset", default="table-s1", choices=sorted(PRESETS),
                        help="built-in device preset the config overlays")
    parser.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override one config value (repeatable)")
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument("--trajectories", type=int, help="trajectory count override")
    parser.add_argument("--workers", type=int, help="worker threads for trajectory batches")
    parser.add_argument("--output", "-o", help="output path (default stdout)")
    parser.add_argument("--show-config", action="store_true",
                        help="print the resolved configuration and exit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bitflip-qec",
        description="Bit-flip code simulator, decoder, and latency toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one protocol at one cycle count")
    _add_common(p_run)
    p_run.add_argument("--protocol", help="protocol name")
    p_run.add_argument("--cycles", type=int, help="number of cycles")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="sweep protocols over cycle counts")
    _add_common(p_sweep)
    p_sweep.add_argument("--protocols", default="all",
                         help="comma-separated protocol names or 'all'")
    p_sweep.add_argument("--cycles", default="1-8", help="cycle counts, e.g. 1-8 or 2,4,6")
    p_sweep.set_defaults(func=cmd_sweep)

    p_table = sub.add_parser("table", help="dump a decoder lookup table")
    _add_common(p_table)
    p_table.add_argument("--cycles", type=int, required=True, help="rounds the table covers")
    p_table.add_argument("--reset", action="store_true",
                         help="build for per-round ancilla reset")
    p_table.set_defaults(func=cmd_table)

    p_decode = sub.add_parser("decode", help="decode a recorded syndrome stream")
    _add_common(p_decode)
    p_decode.add_argument("--input", "-i", required=True,
                          help="stream file, one experiment per line ('-' for stdin)")
    p_decode.add_argument("--cycles", type=int, help="expected rounds per record")
    p_decode.add_argument("--reset", action="store_true",
                          help="records taken with per-round ancilla reset")
    p_decode.set_defaults(func=cmd_decode)

    p_latency = sub.add_parser("latency", help="latency budgets and timelines")
    _add_common(p_latency)
    p_latency.add_argument("--steps", help="comma-separated pipeline durations in ns")
    p_latency.add_argument("--timeline", help="emit the event timeline for this protocol")
    p_latency.add_argument("--cycles", type=int, help="cycles in the timeline (default 2)")
    p_latency.add_argument("--timeline-csv", help="write the timeline CSV here")
    p_latency.set_defaults(func=cmd_latency)

    p_parity = sub.add_parser("parity", help="single-cycle parity distribution")
    _add_common(p_parity)
    p_parity.add_argument("--initial-state", default="all",
                          help="3-bit data state, comma list, or 'all'")
    p_parity.set_defaults(func=cmd_parity)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
