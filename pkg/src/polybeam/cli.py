"""Command-line front end: design, analyze, compare, process, simulate, evaluate.

Every subcommand reads a preset merged with an optional JSON config, writes
its artifacts (binary, CSV, WAV and PNG files) to ``--out`` and exits with
0 on success, 2 on configuration errors, 3 for infeasible designs and 4 for
numerical failures.  Failures print a one-line JSON error report on stderr
and, when the output directory exists, store it as ``error.json``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import metrics, plotting
from .acoustics import IRSetError, NumericFailure
from .design import (
    DesignError,
    FreqWeights,
    InfeasibleDesign,
    design_beamformer,
    design_rlsfi,
    load_weights,
    save_weights,
)
from .engine import process_with_trajectory
from .fir import PolynomialBeamformer, RealizationWarning, load_beamformer, realize_fir, save_beamformer
from .geometry import Direction, SteeringError, SteeringState, interpolation_factors, make_pld_grid
from .sim import Scenario, Source, component_through_beamformer, read_wav, simulate, synthetic_speech, write_wav

__all__ = ["RunConfig", "main", "run", "steering_trajectory_parse"]

log = logging.getLogger("polybeam")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NUMERIC, EXIT_INTERNAL = 0, 2, 3, 4, 1
SUBCOMMANDS = ("design", "analyze", "compare", "process", "simulate", "evaluate")


@dataclass
class RunConfig:
    subcommand: str
    cfg: dict
    out: Path
    seed: int = 0
    paths: dict = field(default_factory=dict)
    base_dir: Path = Path(".")


class TrajectoryError(ValueError):
    pass


def steering_trajectory_parse(path) -> list[tuple[float, SteeringState]]:
    """Read ``time_s az_deg el_deg`` lines into ``(time, SteeringState)`` pairs.

    Blank lines and ``#`` comments are skipped.  Timestamps must increase
    strictly.  An empty file yields the default steering ``(0, 0)``.
    """
    p = Path(path)
    if not p.is_file():
        raise TrajectoryError(f"trajectory file {p} does not exist")
    out = []
    for lineno, raw in enumerate(p.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise TrajectoryError(f"{p}:{lineno}: expected 'time_s az_deg el_deg'")
        try:
            t, az, el = (float(v) for v in parts)
        except ValueError:
            raise TrajectoryError(f"{p}:{lineno}: non-numeric field") from None
        if not np.isfinite(t) or t < 0:
            raise TrajectoryError(f"{p}:{lineno}: invalid time {t}")
        if out and t <= out[-1][0]:
            raise TrajectoryError(f"{p}:{lineno}: timestamps must increase ({t} after {out[-1][0]})")
        try:
            state = interpolation_factors(Direction(az, el))
        except (SteeringError, ValueError) as exc:
            raise TrajectoryError(f"{p}:{lineno}: {exc}") from None
        out.append((t, state))
    return out or [(0.0, SteeringState())]


# --- helpers ----------------------------------------------------------------

def _fmt(v) -> str:
    return repr(float(v))


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _analysis_state(cfg) -> SteeringState:
    a = cfg.get("analysis", {})
    if "look" in a:
        return interpolation_factors(Direction(*a["look"]))
    return SteeringState(*a.get("steering", [0.0, 0.0]))


def _path(rc: RunConfig, key: str, default: str | None = None, must_exist: bool = True) -> Path:
    p = rc.paths.get(key)
    p = Path(p) if p is not None else (rc.out / default if default else None)
    if p is None:
        raise cfgmod.ConfigError(f"--{key.replace('_', '-')} is required")
    if must_exist and not p.exists():
        raise cfgmod.ConfigError(f"{key.replace('_', ' ')} {p} does not exist")
    return p


def _load_artifact(path: Path):
    head = path.read_bytes()[:6]
    if head.startswith(b"PBFW"):
        return load_weights(path)
    return load_beamformer(path)


def _band_freqs(freqs, band):
    freqs = np.asarray(freqs)
    return freqs[(freqs >= band[0]) & (freqs <= band[1])]


# --- subcommands -------------------------------------------------------------

def cmd_design(rc: RunConfig) -> dict:
    model = cfgmod.build_model(rc.cfg, rc.base_dir)
    spec = cfgmod.build_design_spec(rc.cfg, model)
    dcfg = rc.cfg["design"]
    workers = int(dcfg.get("workers", 1))
    t0 = time.perf_counter()
    fw = design_beamformer(spec, workers=workers)
    log.info("designed %d frequencies in %.2f s", len(fw.freqs), time.perf_counter() - t0)
    dense = None
    if dcfg.get("offgrid_check", True):
        L = spec.fir_length
        dense_f = np.arange(2 * L + 1) * spec.fs / (4 * L)
        off = dense_f[np.arange(dense_f.size) % 4 != 0]
        dense = design_beamformer(spec, freqs=off, workers=workers)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RealizationWarning)
        bf = realize_fir(fw, spec.fir_length, dense=dense)
    for w in caught:
        log.warning("%s", w.message)
    save_weights(fw, rc.out / "weights.pbfw")
    save_beamformer(bf, rc.out / "beamformer.pbf")
    gamma_db = 10 * np.log10(spec.gamma)
    rows = [[_fmt(f), s, int(it), _fmt(obj), _fmt(e), _fmt(10 * np.log10(wg))]
            for f, s, it, obj, e, wg in zip(fw.freqs, fw.status, fw.iterations, fw.objective,
                                            fw.eq_residual, fw.min_wng)]
    _write_csv(rc.out / "design_report.csv",
               ["freq_hz", "status", "iterations", "objective", "max_distortion_error", "min_wng_db"], rows)
    series = metrics.MetricSeries(fw.freqs, 10 * np.log10(fw.min_wng), "min WNG over PLDs", "dB")
    plotting.plot_series(rc.out / "design_wng.png", [series], title=f"WNG bound {gamma_db:g} dB")
    summary = {
        "spec_hash": spec.spec_hash(),
        "n_mics": spec.n_mics,
        "P": spec.P,
        "R": spec.R,
        "plds": [[d.az, d.el] for d in spec.plds],
        "fir_length": spec.fir_length,
        "fs": spec.fs,
        "gamma_db": gamma_db,
        "max_distortion_error": float(np.max(fw.eq_residual)),
        "min_wng_db": float(10 * np.log10(np.min(fw.min_wng))),
        "design_error_db": bf.summary()["design_error_db"],
        "offgrid_error_db": bf.summary()["offgrid_error_db"],
    }
    _write_json(rc.out / "design_summary.json", summary)
    return summary


def cmd_analyze(rc: RunConfig) -> dict:
    model = cfgmod.build_model(rc.cfg, rc.base_dir)
    art = _load_artifact(_path(rc, "beamformer", "beamformer.pbf"))
    state = _analysis_state(rc.cfg)
    look = state.direction()
    a = rc.cfg.get("analysis", {})
    grid = cfgmod.build_design_spec(rc.cfg, model).grid
    peaks = []
    for f in a.get("freqs", [500.0, 1000.0, 2000.0, 4000.0]):
        bp = metrics.beampattern(art, model, grid, f, state)
        tag = f"{f:g}Hz"
        metrics.write_beampattern_csv(rc.out / f"beampattern_{tag}.csv", bp)
        plotting.plot_beampattern(rc.out / f"beampattern_{tag}.png", bp,
                                  title=f"{f:g} Hz, steering ({state.d_phi:.3g}, {state.d_theta:.3g})")
        pk = bp.peak()
        peaks.append({"freq_hz": float(f), "peak_az": pk.az, "peak_el": pk.el,
                      "peak_db": float(np.max(bp.magnitude_db))})
    freqs = _band_freqs(art.freqs if isinstance(art, FreqWeights) else
                        np.arange(art.L // 2 + 1) * art.fs / art.L, a.get("band", metrics.DI_BAND))
    wng = metrics.wng_series(art, model, look, freqs, state)
    di = metrics.di_series(art, model, grid, look, freqs, state)
    metrics.write_series_csv(rc.out / "wng.csv", wng)
    metrics.write_series_csv(rc.out / "di.csv", di)
    plotting.plot_series(rc.out / "wng_di.png", [wng, di], title=f"look {look}", ylabel="dB")
    summary = {"steering": [state.d_phi, state.d_theta], "look": [look.az, look.el], "peaks": peaks,
               "mean_wng_db": float(np.mean(wng.values)), "mean_di_db": float(np.mean(di.values))}
    _write_json(rc.out / "analyze_summary.json", summary)
    return summary


def cmd_compare(rc: RunConfig) -> dict:
    model = cfgmod.build_model(rc.cfg, rc.base_dir)
    spec = cfgmod.build_design_spec(rc.cfg, model)
    art = _load_artifact(_path(rc, "beamformer", "weights.pbfw"))
    other = _load_artifact(Path(rc.paths["other"])) if rc.paths.get("other") else None
    c = rc.cfg.get("compare", {})
    grid = spec.grid
    base = art.freqs if isinstance(art, FreqWeights) else np.arange(art.L // 2 + 1) * art.fs / art.L
    freqs = _band_freqs(base, c.get("band", metrics.DI_BAND))
    if freqs.size == 0:
        raise cfgmod.ConfigError("no design frequencies inside the comparison band")
    looks = make_pld_grid(c.get("az", [30, 150]), c.get("el", [30, 150]), c.get("step", 15.0))
    rows = []
    for look in looks:
        state = interpolation_factors(look)
        if other is not None:
            ref_src, ref_state = other, state
        else:
            ref_src = design_rlsfi(model, look, grid, freqs, spec.fs, spec.gamma, spec.beamwidth_3db,
                                   tol=spec.tol, max_iter=spec.max_iter)
            ref_state = None
        bp_a, bp_b, di_a, di_b = [], [], [], []
        for q, f in enumerate(freqs):
            w_a = metrics.weights_at(art, f, state)
            w_b = ref_src[q] if other is None else metrics.weights_at(ref_src, f, ref_state)
            G = model.response(2 * np.pi * f, grid)
            av = model.response(2 * np.pi * f, [look])[0]
            bp_a.append(metrics.BeampatternMap(f, grid, G @ w_a))
            bp_b.append(metrics.BeampatternMap(f, grid, G @ w_b))
            di_a.append(metrics.directivity_index(bp_a[-1], look, av @ w_a))
            di_b.append(metrics.directivity_index(bp_b[-1], look, av @ w_b))
        mse = metrics.response_mse(bp_a, bp_b)
        ddi = metrics.mean_di_difference(metrics.MetricSeries(freqs, di_b), metrics.MetricSeries(freqs, di_a))
        rows.append((look.az, look.el, mse, ddi))
    _write_csv(rc.out / "compare.csv", ["az_deg", "el_deg", "mse", "delta_di_db"],
               [[_fmt(v) for v in r] for r in rows])
    arr = np.array(rows)
    plotting.plot_map(rc.out / "compare_mse.png", arr[:, 0], arr[:, 1], arr[:, 2], "MSE", "response MSE")
    plotting.plot_map(rc.out / "compare_delta_di.png", arr[:, 0], arr[:, 1], arr[:, 3], "dB",
                      "mean DI difference")
    summary = {"n_looks": len(rows), "band_hz": [float(freqs[0]), float(freqs[-1])],
               "max_mse": float(arr[:, 2].max()), "max_abs_delta_di_db": float(np.abs(arr[:, 3]).max()),
               "reference": "artifact" if other is not None else "per-direction fixed design"}
    _write_json(rc.out / "compare_summary.json", summary)
    return summary


def cmd_process(rc: RunConfig) -> dict:
    bf = load_beamformer(_path(rc, "beamformer", "beamformer.pbf"))
    fs, x = read_wav(_path(rc, "input", "mix.wav"))
    if x.shape[0] != bf.n_mics:
        raise cfgmod.ConfigError(f"input has {x.shape[0]} channels, beamformer expects {bf.n_mics}")
    if abs(fs - bf.fs) > 1e-9:
        raise cfgmod.ConfigError(f"input sampled at {fs:g} Hz, beamformer designed for {bf.fs:g} Hz")
    if rc.paths.get("trajectory"):
        traj = steering_trajectory_parse(rc.paths["trajectory"])
    else:
        traj = [(0.0, _analysis_state(rc.cfg))]
    p = rc.cfg.get("process", {})
    y = process_with_trajectory(bf, x, fs, traj, p.get("block_size", 256), p.get("crossfade", True))
    out = Path(rc.paths.get("output") or rc.out / "output.wav")
    write_wav(out, fs, y, p.get("format", "float32"))
    return {"samples": int(y.size), "output": out.name, "steering_changes": len(traj) - 1}


def cmd_simulate(rc: RunConfig) -> dict:
    model = cfgmod.build_model(rc.cfg, rc.base_dir)
    s = rc.cfg["simulate"]
    fs = float(rc.cfg.get("design", {}).get("fs", 16000.0))
    n = int(round(s.get("duration", 10.0) * fs))
    sources = []
    for k, src in enumerate(s["sources"]):
        if "wav" in src:
            wfs, sig = read_wav(rc.base_dir / src["wav"])
            if abs(wfs - fs) > 1e-9:
                raise cfgmod.ConfigError(f"source {k}: {src['wav']} is sampled at {wfs:g} Hz, need {fs:g}")
            sig = sig[0]
            sig = np.pad(sig, (0, max(0, n - sig.size)))[:n]
        else:
            sig = synthetic_speech(n / fs, fs, src.get("synthetic_seed", k + 1))
        sources.append(Source(Direction(*src["direction"]), sig))
    scn = Scenario(model, sources, fs, s.get("snr_db", 40.0), rc.seed, s.get("ir_length", 64),
                   s.get("reference_channel", 0))
    out = simulate(scn)
    fmt = rc.cfg.get("process", {}).get("format", "float32")
    write_wav(rc.out / "mix.wav", fs, out.mic_signals, fmt)
    for k, comp in enumerate(out.components):
        write_wav(rc.out / f"component_{k}.wav", fs, comp, fmt)
        write_wav(rc.out / f"source_{k}.wav", fs, sources[k].signal, fmt)
    write_wav(rc.out / "noise.wav", fs, out.noise, fmt)
    info = {"fs": fs, "samples": n, "snr_db": out.snr_db, "seed": rc.seed, "bulk_delay": out.bulk_delay,
            "reference_channel": scn.reference_channel,
            "sources": [{"direction": [sr.direction.az, sr.direction.el], "file": f"component_{k}.wav"}
                        for k, sr in enumerate(sources)]}
    _write_json(rc.out / "scenario.json", info)
    return info


def cmd_evaluate(rc: RunConfig) -> dict:
    rows = []
    if rc.paths.get("reference") or rc.paths.get("test"):
        fs, ref = read_wav(_path(rc, "reference"))
        fs2, test = read_wav(_path(rc, "test"))
        if fs != fs2:
            raise cfgmod.ConfigError("reference and test sample rates differ")
        rows.append(("test", metrics.fwsegsnr(ref[0], test[0], fs)))
    else:
        sim = _path(rc, "sim_dir", ".")
        info = json.loads((sim / "scenario.json").read_text())
        bf = load_beamformer(_path(rc, "beamformer", "beamformer.pbf"))
        fs, mix = read_wav(sim / "mix.wav")
        _, target = read_wav(sim / info["sources"][0]["file"])
        ch = info["reference_channel"]
        a = rc.cfg.get("analysis", {})
        if "look" in a:
            state = interpolation_factors(Direction(*a["look"]))
        else:
            state = interpolation_factors(Direction(*info["sources"][0]["direction"]))
        rows.append(("input", metrics.fwsegsnr(target[ch], mix[ch], fs)))
        y_t = component_through_beamformer(target, bf, state)
        y = component_through_beamformer(mix, bf, state)
        rows.append(("output", metrics.fwsegsnr(y_t, y, fs)))
        rows.append(("improvement", rows[1][1] - rows[0][1]))
    _write_csv(rc.out / "evaluate.csv", ["measure", "fwsegsnr_db"], [[k, _fmt(v)] for k, v in rows])
    plotting.plot_bars(rc.out / "evaluate.png", [k for k, _ in rows], [v for _, v in rows], "fwSegSNR / dB")
    summary = {k: float(v) for k, v in rows}
    _write_json(rc.out / "evaluate.json", summary)
    return summary


COMMANDS = {"design": cmd_design, "analyze": cmd_analyze, "compare": cmd_compare,
            "process": cmd_process, "simulate": cmd_simulate, "evaluate": cmd_evaluate}


def _classify(exc: BaseException) -> int:
    if isinstance(exc, InfeasibleDesign):
        return EXIT_INFEASIBLE
    if isinstance(exc, (DesignError, NumericFailure, FloatingPointError, np.linalg.LinAlgError)):
        return EXIT_NUMERIC
    if isinstance(exc, (cfgmod.ConfigError, TrajectoryError, SteeringError, IRSetError,
                        FileNotFoundError, ValueError, KeyError)):
        return EXIT_CONFIG
    return EXIT_INTERNAL


def run(rc: RunConfig) -> int:
    """Execute one subcommand; returns the process exit status."""
    try:
        rc.out.mkdir(parents=True, exist_ok=True)
        result = COMMANDS[rc.subcommand](rc)
    except Exception as exc:  # every failure becomes a machine-readable report
        code = _classify(exc)
        report = {"status": "error", "exit_code": code, "error": type(exc).__name__, "message": str(exc),
                  "subcommand": rc.subcommand}
        if isinstance(exc, InfeasibleDesign):
            report["freq_hz"] = exc.freq
            report["pld_index"] = exc.pld
        print(json.dumps(report, sort_keys=True), file=sys.stderr)
        if rc.out.is_dir():
            _write_json(rc.out / "error.json", report)
        if code == EXIT_INTERNAL:
            log.debug("internal error", exc_info=True)
        return code
    log.info("%s done: %s", rc.subcommand, json.dumps(result, sort_keys=True))
    return EXIT_OK


# --- argument parsing --------------------------------------------------------

def _parse_plds(text: str):
    """``azlo:azhi:ello:elhi:step`` or ``az,el;az,el;...``."""
    if ":" in text:
        parts = [float(v) for v in text.split(":")]
        if len(parts) != 5:
            raise cfgmod.ConfigError("--plds grid form is azlo:azhi:ello:elhi:step")
        return {"az": parts[0:2], "el": parts[2:4], "step": parts[4]}
    try:
        return [[float(v) for v in item.split(",")] for item in text.split(";") if item.strip()]
    except ValueError:
        raise cfgmod.ConfigError(f"cannot parse --plds {text!r}") from None


def _overrides(args) -> dict:
    d, a, m = {}, {}, {}
    for key, name in (("gamma_db", "gamma_db"), ("fir_length", "fir_length"), ("P", "P"), ("R", "R"),
                      ("grid_step", "grid_step"), ("beamwidth", "beamwidth_3db"), ("workers", "workers")):
        v = getattr(args, key, None)
        if v is not None:
            d[name] = v
    if getattr(args, "plds", None):
        d["plds"] = _parse_plds(args.plds)
    if getattr(args, "no_offgrid", False):
        d["offgrid_check"] = False
    if getattr(args, "steering", None):
        a["steering"] = list(args.steering)
    if getattr(args, "look", None):
        a["look"] = list(args.look)
    if getattr(args, "freqs", None):
        a["freqs"] = list(args.freqs)
    if getattr(args, "model", None):
        m["kind"] = args.model
    out = {}
    if d:
        out["design"] = d
    if a:
        out["analysis"] = a
    if m:
        out["model"] = m
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config merged over the preset")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
    common.add_argument("--seed", type=int, default=0, help="random seed (unsigned 64-bit)")
    common.add_argument("--preset", choices=sorted(cfgmod.PRESETS), default="desk")
    common.add_argument("-v", "--verbose", action="count", default=0)

    design = argparse.ArgumentParser(add_help=False)
    g = design.add_argument_group("design overrides")
    g.add_argument("--gamma-db", type=float, help="WNG lower bound in dB")
    g.add_argument("--fir-length", type=int, help="FIR length L (even)")
    g.add_argument("--P", type=int, help="azimuth polynomial order")
    g.add_argument("--R", type=int, help="elevation polynomial order")
    g.add_argument("--grid-step", type=float, help="design grid step in degrees")
    g.add_argument("--beamwidth", type=float, help="3-dB beamwidth of the desired response")
    g.add_argument("--plds", help="azlo:azhi:ello:elhi:step or az,el;az,el;...")
    g.add_argument("--model", choices=["free_field", "rigid_sphere", "measured"])
    g.add_argument("--workers", type=int)

    steer = argparse.ArgumentParser(add_help=False)
    s = steer.add_argument_group("steering")
    s.add_argument("--steering", type=float, nargs=2, metavar=("D_PHI", "D_THETA"))
    s.add_argument("--look", type=float, nargs=2, metavar=("AZ", "EL"))

    parser = argparse.ArgumentParser(prog="polybeam", description=__doc__.split("\n\n")[0])
    parser.add_argument("--print-schema", action="store_true", help="print the config JSON schema and exit")
    sub = parser.add_subparsers(dest="subcommand")
    p = sub.add_parser("design", parents=[common, design], help="design weights and FIR filters")
    p.add_argument("--no-offgrid", action="store_true", help="skip the off-grid realization check")
    p = sub.add_parser("analyze", parents=[common, design, steer], help="beampatterns, WNG and DI")
    p.add_argument("--beamformer", type=Path, help="artifact (default: OUT/beamformer.pbf)")
    p.add_argument("--freqs", type=float, nargs="+", help="beampattern frequencies in Hz")
    p = sub.add_parser("compare", parents=[common, design], help="MSE and DI difference maps")
    p.add_argument("--beamformer", type=Path, help="artifact to assess (default: OUT/weights.pbfw)")
    p.add_argument("--other", type=Path, help="reference artifact (default: per-direction fixed designs)")
    p = sub.add_parser("process", parents=[common, steer], help="filter a multichannel WAV")
    p.add_argument("--beamformer", type=Path)
    p.add_argument("--input", type=Path, help="multichannel WAV (default: OUT/mix.wav)")
    p.add_argument("--trajectory", type=Path, help="lines 'time_s az_deg el_deg'")
    p.add_argument("--output", type=Path, help="mono WAV (default: OUT/output.wav)")
    p = sub.add_parser("simulate", parents=[common, design], help="synthesize a multichannel scenario")
    p = sub.add_parser("evaluate", parents=[common, steer], help="fwSegSNR of WAVs or a simulation")
    p.add_argument("--reference", type=Path)
    p.add_argument("--test", type=Path)
    p.add_argument("--sim-dir", type=Path, help="simulate output dir (default: OUT)")
    p.add_argument("--beamformer", type=Path)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_schema:
        print(json.dumps(cfgmod.SCHEMA, indent=2, sort_keys=True))
        return EXIT_OK
    if not args.subcommand:
        parser.print_help(sys.stderr)
        return EXIT_CONFIG
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if not 0 <= args.seed < 2 ** 64:
        print(json.dumps({"status": "error", "exit_code": EXIT_CONFIG, "error": "ConfigError",
                          "message": "seed must be an unsigned 64-bit integer"}), file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = cfgmod.load_config(args.config, args.preset)
        cfg = cfgmod.validate(cfgmod.merge(cfg, _overrides(args)))
    except cfgmod.ConfigError as exc:
        report = {"status": "error", "exit_code": EXIT_CONFIG, "error": "ConfigError",
                  "message": str(exc), "subcommand": args.subcommand}
        print(json.dumps(report, sort_keys=True), file=sys.stderr)
        try:
            args.out.mkdir(parents=True, exist_ok=True)
            _write_json(args.out / "error.json", report)
        except OSError:
            pass
        return EXIT_CONFIG
    paths = {k: getattr(args, k) for k in ("beamformer", "other", "input", "trajectory", "output",
                                          "reference", "test", "sim_dir") if getattr(args, k, None)}
    base_dir = args.config.parent if args.config else Path(".")
    return run(RunConfig(args.subcommand, cfg, args.out, args.seed, paths, base_dir))


if __name__ == "__main__":
    sys.exit(main())
