"""Command-line interface: simulate, fit, fetch, and plot subcommands.

Every command that writes an output also writes ``<out>.manifest``, a
key-value snapshot of the tool version, the fully resolved configuration,
and SHA-256 digests of inputs and outputs.  Manifests contain no
timestamps, so re-running a command with the same flags (and seed)
reproduces outputs and manifests byte for byte.

A ``--config FILE`` of ``key = value`` lines (keys are flag names with
dashes replaced by underscores) can supply any flag's value; explicit flags
override the file, and environment variables override nothing.  The only
environment input is ``BLOCKTIME_RPC_TOKEN``, an optional bearer token for
``fetch``.

Exit codes: 0 success, 2 usage or malformed input, 3 numerical failure,
4 transport/protocol failure.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import os
import shlex
import sys
from pathlib import Path

import numpy as np

from . import __version__, kv
from ._accel import backend_name
from .distributions import GumbelParams, approx_norm_constant, approx_pdf_k
from .errors import (
    BlocktimeError,
    DomainError,
    FitError,
    FormatError,
    IntegrityError,
    ProtocolError,
    QuadratureError,
    SchemaError,
    TransportError,
)
from .fitting import (
    FitOptions,
    approx_model_cdf,
    build_histogram,
    derive_transfer_time,
    fit_fk,
    ks_statistic,
    moment_init,
    quorum_adjust,
    sample_skewness,
)
from .ingest import compute_intervals, fetch_blocks, read_intervals_csv, write_intervals_csv
from .plotting import render_plot_svg
from .simulator import QuorumMode, SimConfig, run_monte_carlo

__all__ = ["main"]


class UsageError(Exception):
    """Bad flag/config combination; maps to exit code 2."""


_REQUIRED = object()


def _conv_int(text: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise UsageError(f"expected an integer, got {text!r}") from exc


def _conv_float(text: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise UsageError(f"expected a number, got {text!r}") from exc


def _conv_str(text: str) -> str:
    return text


def _conv_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise UsageError(f"expected true/false, got {text!r}")


def _conv_bins(text: str):
    if text.strip() == "auto":
        return "auto"
    return _conv_float(text)


# Per-command flag tables: (dest, converter, default).  ``_REQUIRED`` marks
# flags that must come from the command line or the config file.
_SIMULATE_SPEC = [
    ("validators", _conv_int, _REQUIRED),
    ("delta_t", _conv_float, _REQUIRED),
    ("phases", _conv_int, 3),
    ("quorum", _conv_str, "full"),
    ("runs", _conv_int, _REQUIRED),
    ("seed", _conv_int, 0),
    ("create_offset", _conv_float, 0.0),
    ("out", _conv_str, _REQUIRED),
]

_FIT_SPEC = [
    ("input", _conv_str, _REQUIRED),
    ("k", _conv_int, _REQUIRED),
    ("validators", _conv_int, _REQUIRED),
    ("bins", _conv_bins, "auto"),
    ("amplitude", _conv_str, "free"),
    ("max_iter", _conv_int, 200),
    ("poisson_weights", _conv_bool, False),
    ("out", _conv_str, _REQUIRED),
]

_FETCH_SPEC = [
    ("endpoint", _conv_str, _REQUIRED),
    ("from_height", _conv_int, _REQUIRED),
    ("to_height", _conv_int, _REQUIRED),
    ("rate", _conv_float, 5.0),
    ("timeout", _conv_float, 10.0),
    ("retries", _conv_int, 3),
    ("verify_tls", _conv_bool, True),
    ("out", _conv_str, _REQUIRED),
]

_PLOT_SPEC = [
    ("hist", _conv_str, _REQUIRED),
    ("curve", _conv_str, None),
    ("bins", _conv_bins, "auto"),
    ("title", _conv_str, None),
    ("out", _conv_str, _REQUIRED),
]


def _load_config(path: str | None) -> dict[str, str]:
    if path is None:
        return {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    try:
        return kv.parse_key_values(text)
    except FormatError as exc:
        raise UsageError(f"config file {path}: {exc}") from exc


def _resolve(args: argparse.Namespace, spec) -> dict:
    """Merge CLI flags over config-file values over built-in defaults."""
    file_values = _load_config(args.config)
    known = {dest for dest, _, _ in spec}
    unknown = [key for key in file_values if key not in known]
    if unknown:
        raise UsageError(f"config file has unknown key(s): {', '.join(sorted(unknown))}")
    resolved = {}
    for dest, conv, default in spec:
        value = getattr(args, dest)
        if value is not None:
            resolved[dest] = conv(value) if isinstance(value, str) else value
        elif dest in file_values:
            resolved[dest] = conv(file_values[dest])
        elif default is _REQUIRED:
            flag = "--" + dest.replace("_", "-")
            raise UsageError(f"missing required {flag} (set it as a flag or in --config)")
        else:
            resolved[dest] = default
    return resolved


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_text(path: Path, text: str) -> None:
    path.write_bytes(text.encode("utf-8"))


def _write_manifest(
    out_path: Path,
    command: str,
    argv: list[str],
    resolved: dict,
    inputs: dict[str, Path],
    outputs: dict[str, Path],
) -> Path:
    pairs: list[tuple[str, object]] = [
        ("manifest.version", 1),
        ("tool.name", "blocktime"),
        ("tool.version", __version__),
        ("command", command),
        ("argv", shlex.join(argv)),
        ("backend", backend_name()),
    ]
    if "seed" in resolved:
        pairs.append(("seed", resolved["seed"]))
    for key in sorted(resolved):
        pairs.append((f"config.{key}", kv.fmt_value(resolved[key])))
    for name in sorted(inputs):
        pairs.append((f"input.{name}.sha256", _sha256(inputs[name])))
    for name in sorted(outputs):
        pairs.append((f"output.{name}.sha256", _sha256(outputs[name])))
    manifest_path = Path(str(out_path) + ".manifest")
    _write_text(manifest_path, kv.format_key_values(pairs))
    return manifest_path


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _cmd_simulate(args: argparse.Namespace, argv: list[str]) -> int:
    resolved = _resolve(args, _SIMULATE_SPEC)
    config = SimConfig(
        n_validators=resolved["validators"],
        delta_t=resolved["delta_t"],
        phases=resolved["phases"],
        quorum_mode=QuorumMode(resolved["quorum"])
        if not isinstance(resolved["quorum"], QuorumMode)
        else resolved["quorum"],
        seed=resolved["seed"],
        create_offset=resolved["create_offset"],
    )
    result = run_monte_carlo(config, resolved["runs"])

    out_path = Path(resolved["out"])
    lines = ["interval_seconds"]
    lines.extend(repr(float(x)) for x in result.samples)
    _write_text(out_path, "\n".join(lines) + "\n")

    summary_path = Path(str(out_path) + ".summary.txt")
    summary = result.summary
    _write_text(
        summary_path,
        kv.format_key_values(
            [
                ("samples", result.samples.size),
                ("mean", summary.mean),
                ("std_dev", summary.std_dev),
                ("variance", summary.variance),
                ("skewness", summary.skewness),
                ("backend", backend_name()),
            ]
        ),
    )
    _write_manifest(
        out_path,
        "simulate",
        argv,
        resolved,
        inputs={},
        outputs={"samples": out_path, "summary": summary_path},
    )
    return 0


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

_FIT_MODES = ("raw", "free", "renorm")


def _model_density(centers: np.ndarray, k: int, params: GumbelParams, mode: str,
                   amplitude: float | None, quad_rel_tol: float) -> np.ndarray:
    values = approx_pdf_k(centers, k, params)
    if mode == "free":
        return (1.0 if amplitude is None else amplitude) * values
    if mode == "renorm" and k >= 2:
        return values / approx_norm_constant(k, params, quad_rel_tol)
    return values


def _cmd_fit(args: argparse.Namespace, argv: list[str]) -> int:
    resolved = _resolve(args, _FIT_SPEC)
    if resolved["amplitude"] not in _FIT_MODES:
        raise UsageError(
            f"--amplitude must be one of {', '.join(_FIT_MODES)}, got {resolved['amplitude']!r}"
        )
    input_path = Path(resolved["input"])
    try:
        with input_path.open("r", encoding="utf-8", newline="") as stream:
            _, samples = read_intervals_csv(stream)
    except OSError as exc:
        raise UsageError(f"cannot read {input_path}: {exc}") from exc
    if samples.size < 2:
        raise DomainError(f"{input_path} holds {samples.size} interval(s); need >= 2")

    hist = build_histogram(samples, bins=resolved["bins"])
    k = resolved["k"]
    primary_mode = resolved["amplitude"]
    base_options = FitOptions(
        amplitude=primary_mode,
        max_iter=resolved["max_iter"],
        poisson_weights=resolved["poisson_weights"],
    )
    init = moment_init(hist, k)

    fits: dict[str, object] = {}
    errors: dict[str, str] = {}
    for mode in _FIT_MODES:
        options = FitOptions(
            amplitude=mode,
            max_iter=base_options.max_iter,
            poisson_weights=base_options.poisson_weights,
        )
        try:
            fits[mode] = fit_fk(hist, k, init=init, options=options)
        except (FitError, QuadratureError, DomainError) as exc:
            if mode == primary_mode:
                raise
            errors[mode] = str(exc)

    primary = fits[primary_mode]
    estimate = derive_transfer_time(primary.mu_hat, primary.eta_hat, resolved["validators"])
    adjusted = quorum_adjust(estimate)
    cdf = approx_model_cdf(k, primary.params(), float(samples.min()), float(samples.max()))
    ks_value = ks_statistic(samples, cdf)
    skew_value = sample_skewness(samples)

    pairs: list[tuple[str, object]] = [
        ("tool.version", __version__),
        ("input.file", str(input_path)),
        ("input.samples", int(samples.size)),
        ("histogram.bins", int(hist.counts.size)),
        ("histogram.origin", float(hist.bin_edges[0])),
        ("histogram.width", float(hist.widths[0])),
        ("init.location", init.location),
        ("init.scale", init.scale),
        ("fit.primary", primary_mode),
    ]
    for mode in _FIT_MODES:
        if mode in fits:
            for key, value in fits[mode].to_key_values().items():
                pairs.append((f"fit.{mode}.{key}", value))
        else:
            pairs.append((f"fit.{mode}.error", errors[mode]))
    for prefix, est in (("transfer", estimate), ("transfer_adjusted", adjusted)):
        pairs.extend(
            [
                (f"{prefix}.delta_t_from_mu", est.delta_t_from_mu),
                (f"{prefix}.delta_t_from_eta", est.delta_t_from_eta),
                (f"{prefix}.delta_t_nominal", est.delta_t_nominal),
                (f"{prefix}.broadcast_freq_total", est.broadcast_freq_total),
                (f"{prefix}.broadcast_freq_per_node", est.broadcast_freq_per_node),
                (f"{prefix}.n_validators", est.n_validators),
                (f"{prefix}.quorum_adjusted", est.quorum_adjusted),
            ]
        )
    pairs.append(("goodness.ks", ks_value))
    pairs.append(("goodness.skewness", skew_value))
    for key, value in base_options.to_key_values().items():
        pairs.append((f"options.{key}", value))

    out_path = Path(resolved["out"])
    _write_text(out_path, kv.format_key_values(pairs))

    centers = hist.centers
    model = _model_density(
        centers, k, primary.params(), primary_mode,
        getattr(primary, "amplitude_hat", None), base_options.quad_rel_tol,
    )
    curve_lines = ["t,data_density,model_density"]
    for t_val, data_val, model_val in zip(centers, hist.densities, model):
        curve_lines.append(f"{float(t_val)!r},{float(data_val)!r},{float(model_val)!r}")
    curve_path = Path(str(out_path) + ".curve.csv")
    _write_text(curve_path, "\n".join(curve_lines) + "\n")

    _write_manifest(
        out_path,
        "fit",
        argv,
        resolved,
        inputs={"intervals": input_path},
        outputs={"report": out_path, "curve": curve_path},
    )
    return 0


# ---------------------------------------------------------------------------
# fetch
# ---------------------------------------------------------------------------


def _cmd_fetch(args: argparse.Namespace, argv: list[str]) -> int:
    resolved = _resolve(args, _FETCH_SPEC)
    records = fetch_blocks(
        resolved["endpoint"],
        resolved["from_height"],
        resolved["to_height"],
        rate_limit=resolved["rate"],
        timeout=resolved["timeout"],
        max_retries=resolved["retries"],
        verify_tls=resolved["verify_tls"],
        bearer_token=os.environ.get("BLOCKTIME_RPC_TOKEN") or None,
    )
    series = compute_intervals(records)

    out_path = Path(resolved["out"])
    buffer = io.StringIO()
    write_intervals_csv(series, buffer)
    _write_text(out_path, buffer.getvalue())

    droplog_path = Path(str(out_path) + ".droplog.txt")
    droplog_lines = [f"{height}\t{reason}" for height, reason in series.drop_log]
    _write_text(droplog_path, "\n".join(droplog_lines) + ("\n" if droplog_lines else ""))

    _write_manifest(
        out_path,
        "fetch",
        argv,
        resolved,
        inputs={},
        outputs={"intervals": out_path, "droplog": droplog_path},
    )
    return 0


# ---------------------------------------------------------------------------
# plot
# ---------------------------------------------------------------------------


def _read_curve_file(path: Path) -> tuple[np.ndarray, np.ndarray] | None:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        return None
    header = [column.strip() for column in lines[0].split(",")]
    if header == ["t", "data_density", "model_density"]:
        t_col, y_col = 0, 2
    elif header == ["t", "model_density"]:
        t_col, y_col = 0, 1
    else:
        raise FormatError(
            f"unrecognized curve header {header}; expected "
            "t,data_density,model_density or t,model_density"
        )
    if len(lines) == 1:
        return None
    t_vals: list[float] = []
    y_vals: list[float] = []
    for row_number, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(header):
            raise FormatError(
                f"curve row {row_number}: expected {len(header)} columns, got {len(cells)}"
            )
        try:
            t_vals.append(float(cells[t_col]))
            y_vals.append(float(cells[y_col]))
        except ValueError as exc:
            raise FormatError(f"curve row {row_number}: {exc}") from exc
    return np.asarray(t_vals), np.asarray(y_vals)


def _cmd_plot(args: argparse.Namespace, argv: list[str]) -> int:
    resolved = _resolve(args, _PLOT_SPEC)
    hist_path = Path(resolved["hist"])
    try:
        with hist_path.open("r", encoding="utf-8", newline="") as stream:
            _, samples = read_intervals_csv(stream)
    except OSError as exc:
        raise UsageError(f"cannot read {hist_path}: {exc}") from exc
    hist = build_histogram(samples, bins=resolved["bins"])

    curve_t = curve_y = None
    inputs = {"hist": hist_path}
    if resolved["curve"] is not None:
        curve_path = Path(resolved["curve"])
        curve = _read_curve_file(curve_path)
        inputs["curve"] = curve_path
        if curve is not None:
            curve_t, curve_y = curve
            lo, hi = float(hist.bin_edges[0]), float(hist.bin_edges[-1])
            t_lo, t_hi = float(np.min(curve_t)), float(np.max(curve_t))
            span = hi - lo
            if t_lo < lo - 1e-9 * span or t_hi > hi + 1e-9 * span:
                print(
                    f"warning: curve t-range [{t_lo:g}, {t_hi:g}] clipped to "
                    f"histogram range [{lo:g}, {hi:g}]",
                    file=sys.stderr,
                )

    svg = render_plot_svg(hist, curve_t, curve_y, title=resolved["title"])
    out_path = Path(resolved["out"])
    _write_text(out_path, svg)
    _write_manifest(out_path, "plot", argv, resolved, inputs=inputs, outputs={"svg": out_path})
    return 0


# ---------------------------------------------------------------------------
# parser / entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blocktime",
        description="Simulate, fit, fetch, and plot validator block-time distributions.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="Monte Carlo block-time samples")
    p_sim.add_argument("--validators", metavar="N")
    p_sim.add_argument("--delta-t", dest="delta_t", metavar="SECONDS")
    p_sim.add_argument("--phases", metavar="K")
    p_sim.add_argument("--quorum", choices=["full", "two-thirds"])
    p_sim.add_argument("--runs", metavar="R")
    p_sim.add_argument("--seed", metavar="Z")
    p_sim.add_argument("--create-offset", dest="create_offset", metavar="SECONDS")
    p_sim.add_argument("--out", metavar="PATH")
    p_sim.add_argument("--config", metavar="FILE")
    p_sim.set_defaults(func=_cmd_simulate)

    p_fit = sub.add_parser("fit", help="fit the k-round density to intervals")
    p_fit.add_argument("--input", metavar="CSV")
    p_fit.add_argument("--k", metavar="K")
    p_fit.add_argument("--validators", metavar="N")
    p_fit.add_argument("--bins", metavar="auto|WIDTH")
    p_fit.add_argument("--amplitude", choices=list(_FIT_MODES))
    p_fit.add_argument("--max-iter", dest="max_iter", metavar="M")
    p_fit.add_argument(
        "--poisson-weights", dest="poisson_weights", action="store_const", const=True
    )
    p_fit.add_argument("--out", metavar="PATH")
    p_fit.add_argument("--config", metavar="FILE")
    p_fit.set_defaults(func=_cmd_fit)

    p_fetch = sub.add_parser("fetch", help="fetch block headers over RPC")
    p_fetch.add_argument("--endpoint", metavar="URL")
    p_fetch.add_argument("--from", dest="from_height", metavar="H1")
    p_fetch.add_argument("--to", dest="to_height", metavar="H2")
    p_fetch.add_argument("--rate", metavar="PER_SECOND")
    p_fetch.add_argument("--timeout", metavar="SECONDS")
    p_fetch.add_argument("--retries", metavar="M")
    p_fetch.add_argument(
        "--no-verify-tls", dest="verify_tls", action="store_const", const=False
    )
    p_fetch.add_argument("--out", metavar="PATH")
    p_fetch.add_argument("--config", metavar="FILE")
    p_fetch.set_defaults(func=_cmd_fetch)

    p_plot = sub.add_parser("plot", help="render histogram + fitted curve SVG")
    p_plot.add_argument("--hist", metavar="CSV")
    p_plot.add_argument("--curve", metavar="CSV")
    p_plot.add_argument("--bins", metavar="auto|WIDTH")
    p_plot.add_argument("--title", metavar="TEXT")
    p_plot.add_argument("--out", metavar="SVG")
    p_plot.add_argument("--config", metavar="FILE")
    p_plot.set_defaults(func=_cmd_plot)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else 0
    try:
        return args.func(args, argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SchemaError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FitError, QuadratureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (TransportError, ProtocolError, IntegrityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except BlocktimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
