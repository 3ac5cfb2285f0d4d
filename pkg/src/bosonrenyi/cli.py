"""Batch driver: quench scans, size scaling, Z-structure reports and a permanent benchmark.

Every subcommand takes an optional declarative config file (YAML or JSON)
whose keys match the long flag names; flags given on the command line win.
CSV bodies depend only on the config, so reruns are byte-identical; wall
times and versions go to a JSON sidecar next to the CSV.

Exit codes: 0 ok, 2 config, 3 infeasible size, 4 bound violation,
5 numerical breakdown, 130 interrupted.  Failures print one JSON line
``{"error": <category>, "message": ...}`` on stderr.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .correlations import InitialState, correlation_matrix, z_block_structure
from .entropy import NumericalBreakdownError, gaussian_trace, renyi2_at, time_average
from .permanent import BBFG_MAX, NAIVE_MAX, RYSER_MAX, permanent

COLUMNS = ("state", "L", "L_A", "tJ", "S2", "S2_gaussian", "s_tilde", "g", "lower_bound",
           "perm_method", "perm_seconds", "seed")
SCALING_COLUMNS = ("state", "L", "inv_L", "n_times", "S2_density", "S2_density_stderr",
                   "S2_gaussian_density", "page_density", "page_density_stderr")
ENGINES = ("naive", "ryser", "bbfg", "bbfg-par")
# largest L per state; MI at L = 25 already needs a 50 x 50 permanent
FEASIBLE_L = {"MI": 25, "CDW": 50}
# fixed-N Page sampling: unit filling up to 12 sites, half filling up to 16
PAGE_L = {"MI": 12, "CDW": 16}
FIT_SIZES = 5

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_BOUND, EXIT_BREAKDOWN, EXIT_INTERRUPT = 0, 2, 3, 4, 5, 130


class CliError(Exception):
    def __init__(self, category: str, message: str, code: int):
        super().__init__(message)
        self.category = category
        self.code = code


def config_error(msg):
    return CliError("config", msg, EXIT_CONFIG)


@dataclass
class ScanConfig:
    state: str = "MI"
    sizes: list = field(default_factory=lambda: [8])
    cut: str | int = "half"
    tgrid: str = "log"
    tmin: float = 0.1
    tmax: float = 1e3
    tpoints: int = 64
    times: list | None = None
    tfrac: list | None = None
    engine: str = "bbfg"
    workers: int = 1
    scan_workers: int = 1
    allow_nested: bool = False
    gaussian: bool = False
    page: bool = False
    page_samples: int = 1024
    s_tilde: bool = True
    bounds: bool = True
    record_timings: bool = False
    seed: int = 0
    eps: float = 1e-10
    out: str = "scan"

    def state_obj(self) -> InitialState:
        try:
            return InitialState(self.state)
        except ValueError as exc:
            raise config_error(str(exc)) from None

    def cut_for(self, L: int) -> int:
        if self.cut == "half":
            return L // 2
        try:
            la = int(self.cut)
        except (TypeError, ValueError):
            raise config_error(f"cut must be 'half' or an integer, got {self.cut!r}") from None
        if not 1 <= la <= L - 1:
            raise config_error(f"cut {la} is not a bipartition of L={L}")
        return la

    def time_grid(self) -> np.ndarray:
        if self.times is not None:
            ts = np.asarray(self.times, dtype=float)
        elif self.tgrid == "log":
            if not 0 < self.tmin < self.tmax:
                raise config_error("log grid needs 0 < tmin < tmax")
            ts = np.geomspace(self.tmin, self.tmax, self.tpoints)
        elif self.tgrid == "lin":
            if not 0 <= self.tmin < self.tmax:
                raise config_error("linear grid needs 0 <= tmin < tmax")
            ts = np.linspace(self.tmin, self.tmax, self.tpoints)
        else:
            raise config_error(f"tgrid must be 'lin' or 'log', got {self.tgrid!r}")
        if ts.size == 0 or np.any(ts < 0) or np.any(np.diff(ts) <= 0) or not np.all(np.isfinite(ts)):
            raise config_error("time grid must be nonempty, nonnegative and strictly increasing")
        return ts

    def validate(self, permanents: bool = True):
        st = self.state_obj()
        if not self.sizes:
            raise config_error("no system sizes given")
        for L in self.sizes:
            if int(L) != L or L < 2:
                raise config_error(f"system size must be an integer >= 2, got {L!r}")
            try:
                st.check(int(L))
            except ValueError as exc:
                raise config_error(str(exc)) from None
            self.cut_for(int(L))
        if self.engine not in ENGINES:
            raise config_error(f"engine must be one of {ENGINES}, got {self.engine!r}")
        if self.workers < 1 or self.scan_workers < 1:
            raise config_error("worker counts must be >= 1")
        if self.scan_workers > 1 and self.workers > 1 and not self.allow_nested:
            raise config_error("scan-level and permanent-level workers are both > 1; "
                               "set allow_nested to nest them")
        if permanents:
            limit = {"naive": NAIVE_MAX, "ryser": RYSER_MAX}.get(self.engine, BBFG_MAX)
            for L in self.sizes:
                if L > FEASIBLE_L[st.kind]:
                    raise CliError("infeasible_size",
                                   f"{st.kind} L={L} exceeds the feasible frontier L <= {FEASIBLE_L[st.kind]} "
                                   f"(permanent of size {2 * st.particle_count(L)} would need "
                                   f"2^{2 * st.particle_count(L) - 1} terms)", EXIT_INFEASIBLE)
                m = 2 * st.particle_count(L)
                if m > limit:
                    raise CliError("infeasible_size",
                                   f"engine {self.engine} is limited to {limit} x {limit}; L={L} needs {m} x {m}",
                                   EXIT_INFEASIBLE)
        if self.page:
            for L in self.sizes:
                if L > PAGE_L[st.kind]:
                    raise CliError("infeasible_size",
                                   f"Page sampling for {st.kind} is limited to L <= {PAGE_L[st.kind]}",
                                   EXIT_INFEASIBLE)
        self.time_grid()


def load_config_file(path) -> dict:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise config_error(f"cannot read config {path}: {exc}") from None
    try:
        if p.suffix == ".json":
            data = json.loads(text)
        else:
            import yaml

            data = yaml.safe_load(text)
    except Exception as exc:
        raise config_error(f"cannot parse config {path}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise config_error("config file must hold a mapping")
    names = {f.name for f in dataclasses.fields(ScanConfig)}
    unknown = set(data) - names
    if unknown:
        raise config_error(f"unknown config keys: {sorted(unknown)}")
    return data


def _int_list(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def _float_list(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def build_config(args) -> ScanConfig:
    values = load_config_file(args.config) if args.config else {}
    for f in dataclasses.fields(ScanConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    if isinstance(values.get("sizes"), (int, str)):
        values["sizes"] = _int_list(values["sizes"])
    try:
        cfg = ScanConfig(**values)
    except TypeError as exc:
        raise config_error(str(exc)) from None
    cfg.state = cfg.state.upper()
    cfg.sizes = [int(L) for L in cfg.sizes]
    return cfg


# -- output helpers ----------------------------------------------------------


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if math.isnan(v):
            return ""
        return format(float(v) + 0.0, ".12g")
    return str(v)


class CsvSink:
    """Row writer that flushes after every row so interrupts keep partial data."""

    def __init__(self, path: Path, columns):
        path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(path, "w", newline="", encoding="utf-8")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(columns)
        self.columns = columns
        self.rows = 0

    def write(self, row: dict):
        self._w.writerow([fmt(row.get(c)) for c in self.columns])
        self._fh.flush()
        self.rows += 1

    def close(self):
        self._fh.close()


def versions() -> dict:
    import numba
    import scipy

    from . import __version__

    return {"bosonrenyi": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__}


def write_sidecar(path: Path, cfg: ScanConfig, status: str, extra: dict):
    data = {"status": status, "config": dataclasses.asdict(cfg), "versions": versions(),
            "written_at": time.strftime("%Y-%m-%dT%H:%M:%S%z")}
    data.update(extra)
    path.write_text(json.dumps(data, indent=2, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(type(o).__name__)


# -- scans -------------------------------------------------------------------


def _engine_name(engine: str) -> str:
    return "bbfg_parallel" if engine == "bbfg-par" else engine


def compute_row(cfg: ScanConfig, L: int, tJ: float) -> tuple[dict, float]:
    la = cfg.cut_for(L)
    try:
        p = renyi2_at(L, cfg.state, float(tJ), L_A=la, engine=_engine_name(cfg.engine),
                      workers=cfg.workers, gaussian=cfg.gaussian)
    except NumericalBreakdownError as exc:
        raise CliError("numerical_breakdown", str(exc), EXIT_BREAKDOWN) from None
    if not p.bound_holds():
        raise CliError("bound_violation",
                       f"S2={p.S2!r} < lower bound {p.lower_bound!r} at state={p.state} L={L} tJ={tJ} "
                       f"(g={p.g!r}, perm={p.perm_value!r})", EXIT_BOUND)
    row = {
        "state": p.state, "L": L, "L_A": la, "tJ": float(tJ), "S2": p.S2,
        "S2_gaussian": p.S2_gaussian,
        "s_tilde": p.s_tilde if cfg.s_tilde else None,
        "g": p.g if cfg.bounds else None,
        "lower_bound": p.lower_bound if cfg.bounds else None,
        "perm_method": p.perm_method,
        "perm_seconds": p.perm_seconds if cfg.record_timings else None,
        "seed": cfg.seed,
    }
    return row, p.perm_seconds


def _page_for(cfg: ScanConfig, L: int) -> dict:
    from .correlations import CutSpec
    from .ed_oracle import enumerate_basis, page_value

    st = cfg.state_obj()
    basis = enumerate_basis(L, st.particle_count(L))
    mean, err = page_value(basis, CutSpec(cfg.cut_for(L)), cfg.page_samples, cfg.seed)
    return {"mean": mean, "stderr": err, "samples": cfg.page_samples, "seed": cfg.seed, "dim": basis.dim}


def run_scan(cfg: ScanConfig) -> Path:
    """One CSV row per (L, tJ); returns the CSV path."""
    cfg.validate()
    ts = cfg.time_grid()
    out = Path(cfg.out)
    csv_path = out.with_suffix(".csv")
    side_path = out.with_suffix(".json")
    tasks = [(L, t) for L in cfg.sizes for t in ts]
    sink = CsvSink(csv_path, COLUMNS)
    timings = []
    page = {}
    t0 = time.perf_counter()
    status = "ok"
    try:
        if cfg.scan_workers == 1:
            for L, t in tasks:
                row, sec = compute_row(cfg, L, t)
                sink.write(row)
                timings.append({"L": L, "tJ": float(t), "perm_seconds": sec})
        else:
            with ThreadPoolExecutor(max_workers=cfg.scan_workers) as pool:
                futures = [pool.submit(compute_row, cfg, L, t) for L, t in tasks]
                # consume in submission order so the CSV is independent of scheduling
                for (L, t), fut in zip(tasks, futures):
                    row, sec = fut.result()
                    sink.write(row)
                    timings.append({"L": L, "tJ": float(t), "perm_seconds": sec})
        if cfg.page:
            page = {str(L): _page_for(cfg, L) for L in cfg.sizes}
    except KeyboardInterrupt:
        status = "interrupted"
        raise
    except CliError as exc:
        status = exc.category
        raise
    finally:
        sink.close()
        write_sidecar(side_path, cfg, status, {
            "kind": "scan", "csv": csv_path.name, "rows": sink.rows, "n_times": int(ts.size),
            "wall_seconds": time.perf_counter() - t0, "timings": timings, "page": page,
        })
    return csv_path


def _fit(inv_l, dens):
    x = np.asarray(inv_l, float)
    y = np.asarray(dens, float)
    ok = np.isfinite(y)
    x, y = x[ok], y[ok]
    if x.size < 2:
        return None
    order = np.argsort(x)[:FIT_SIZES]  # smallest 1/L, i.e. largest L
    slope, intercept = np.polyfit(x[order], y[order], 1)
    return {"intercept": float(intercept), "slope": float(slope), "sizes_used": int(order.size)}


def run_size_scaling(cfg: ScanConfig) -> Path:
    """Time-averaged densities vs 1/L plus linear fits over the largest sizes."""
    cfg.validate()
    ts = cfg.time_grid()
    out = Path(cfg.out)
    csv_path = out.with_suffix(".csv")
    side_path = out.with_suffix(".json")
    sink = CsvSink(csv_path, SCALING_COLUMNS)
    t0 = time.perf_counter()
    table = []
    status = "ok"
    fits = {}
    try:
        for L in sorted(cfg.sizes):
            s2 = [compute_row(cfg, L, t)[0]["S2"] for t in ts]
            mean, err = time_average(s2)
            row = {"state": cfg.state, "L": L, "inv_L": 1.0 / L, "n_times": int(ts.size),
                   "S2_density": mean / L, "S2_density_stderr": err / L}
            if cfg.gaussian:
                g = gaussian_trace(L, cfg.state, ts, L_A=cfg.cut_for(L))
                row["S2_gaussian_density"] = float(np.mean(g)) / L
            if cfg.page:
                pv = _page_for(cfg, L)
                row["page_density"] = pv["mean"] / L
                row["page_density_stderr"] = pv["stderr"] / L
            sink.write(row)
            table.append(row)
        inv = [r["inv_L"] for r in table]
        for key in ("S2_density", "S2_gaussian_density", "page_density"):
            fit = _fit(inv, [r.get(key, float("nan")) for r in table])
            if fit is not None:
                fits[key] = fit
    except KeyboardInterrupt:
        status = "interrupted"
        raise
    except CliError as exc:
        status = exc.category
        raise
    finally:
        sink.close()
        write_sidecar(side_path, cfg, status, {
            "kind": "size-scaling", "csv": csv_path.name, "rows": sink.rows,
            "n_times": int(ts.size), "fits": fits, "wall_seconds": time.perf_counter() - t0,
        })
    return csv_path


def run_structure_report(cfg: ScanConfig) -> Path:
    """JSON list of block-structure diagnostics for MI with the half cut."""
    if cfg.state_obj().kind != "MI":
        raise config_error("structure reports are defined for the MI state")
    if cfg.cut != "half":
        raise config_error("structure reports use the half cut")
    cfg.validate(permanents=False)
    reports = []
    for L in cfg.sizes:
        times = [f * L for f in cfg.tfrac] if cfg.tfrac is not None else cfg.time_grid()
        for tJ in times:
            r = z_block_structure(correlation_matrix(L, "MI", float(tJ)), cfg.eps).to_dict()
            r["width_over_4tJ"] = r["width"] / r["four_tJ"] if r["four_tJ"] > 0 else None
            reports.append(r)
    path = Path(cfg.out).with_suffix(".json")
    path.parent.mkdir(parents=True, exist_ok=True)
    write_sidecar(path, cfg, "ok", {"kind": "structure", "reports": reports})
    return path


def bench_matrix(m: int, tJ: float | None = None) -> np.ndarray:
    """CDW swap matrix of size ``m`` (L = m sites), late enough to be dense."""
    from .correlations import build_swap_matrix

    L = m
    return build_swap_matrix(correlation_matrix(L, "CDW", float(L) if tJ is None else tJ)).a


def run_bench(sizes, methods=("bbfg",), workers=(1,), repeat: int = 1) -> list[dict]:
    """Wall time and terms/second per (M, method, workers).

    The spread of values across worker counts (which only reorders the
    compensated sums) is reported as an accuracy estimate for each M.
    """
    rows = []
    for m in sizes:
        if m % 2:
            raise config_error(f"benchmark sizes must be even, got {m}")
        a = bench_matrix(m)
        values = []
        for method in methods:
            for w in (workers if method == "bbfg-par" else (1,)):
                best = math.inf
                for _ in range(repeat):
                    t0 = time.perf_counter()
                    res = permanent(a, _engine_name(method), w)
                    best = min(best, time.perf_counter() - t0)
                values.append(res.value)
                rows.append({"M": m, "method": method, "workers": w, "seconds": best,
                             "terms": res.terms, "terms_per_second": res.terms / best if best > 0 else None,
                             "perm_re": res.value.real, "perm_im": res.value.imag})
        ref = values[0]
        spread = max(abs(v - ref) for v in values) / abs(ref) if ref != 0 else float("nan")
        for r in rows:
            if r["M"] == m:
                r["rel_spread"] = spread
    return rows


# -- argument parsing --------------------------------------------------------


def _add_common(p, out_default):
    p.add_argument("--config", help="YAML or JSON file; keys match the long flag names")
    p.add_argument("--state", choices=["MI", "CDW", "mi", "cdw"])
    p.add_argument("--sizes", type=_int_list, help="comma-separated system sizes")
    p.add_argument("--cut", help="'half' or subsystem size L_A")
    p.add_argument("--tmin", type=float)
    p.add_argument("--tmax", type=float)
    p.add_argument("--tpoints", type=int)
    p.add_argument("--tgrid", choices=["lin", "log"])
    p.add_argument("--times", type=_float_list, help="explicit comma-separated tJ values")
    p.add_argument("--engine", choices=list(ENGINES))
    p.add_argument("--workers", type=int, help="threads inside one permanent")
    p.add_argument("--scan-workers", type=int, dest="scan_workers", help="scan points in flight")
    p.add_argument("--allow-nested", action="store_const", const=True, dest="allow_nested")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default=None, help=f"output path prefix (default {out_default})")
    p.add_argument("--gaussian", action="store_const", const=True)
    p.add_argument("--page", action="store_const", const=True)
    p.add_argument("--page-samples", type=int, dest="page_samples")
    p.add_argument("--no-s-tilde", action="store_const", const=False, dest="s_tilde")
    p.add_argument("--no-bounds", action="store_const", const=False, dest="bounds")
    p.add_argument("--record-timings", action="store_const", const=True, dest="record_timings",
                   help="write perm_seconds into the CSV (breaks byte-identical reruns)")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bosonrenyi",
                                     description="Second Renyi entropy after a free-boson quench")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("scan", help="S2(t) rows for each size and time")
    _add_common(p, "scan")
    p = sub.add_parser("size-scaling", help="time-averaged densities vs 1/L with linear fits")
    _add_common(p, "size_scaling")
    p = sub.add_parser("structure", help="block structure of Z for MI (JSON)")
    _add_common(p, "structure")
    p.add_argument("--tfrac", type=_float_list, help="comma-separated tJ/L values")
    p.add_argument("--eps", type=float)
    p = sub.add_parser("bench", help="permanent timing and accuracy harness")
    p.add_argument("--sizes", type=_int_list, default=[16, 20, 24])
    p.add_argument("--methods", default="bbfg", help="comma-separated engines")
    p.add_argument("--workers", type=_int_list, default=[1, 2])
    p.add_argument("--repeat", type=int, default=1)
    p.add_argument("--out", default=None, help="JSON output path (default: stdout)")
    return parser


def _fail(exc: CliError) -> int:
    print(json.dumps({"error": exc.category, "message": str(exc)}), file=sys.stderr)
    return exc.code


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "bench":
            methods = [m.strip() for m in args.methods.split(",") if m.strip()]
            bad = set(methods) - set(ENGINES)
            if bad:
                raise config_error(f"unknown engines {sorted(bad)}")
            rows = run_bench(args.sizes, methods, args.workers, args.repeat)
            text = json.dumps(rows, indent=2)
            if args.out:
                Path(args.out).write_text(text + "\n")
            else:
                print(text)
            return EXIT_OK
        if args.out is None:
            args.out = {"scan": "scan", "size-scaling": "size_scaling", "structure": "structure"}[args.command]
        cfg = build_config(args)
        if args.command == "scan":
            path = run_scan(cfg)
        elif args.command == "size-scaling":
            path = run_size_scaling(cfg)
        else:
            path = run_structure_report(cfg)
        print(path)
        return EXIT_OK
    except CliError as exc:
        return _fail(exc)
    except KeyboardInterrupt:
        print(json.dumps({"error": "interrupted", "message": "partial results flushed"}), file=sys.stderr)
        return EXIT_INTERRUPT


if __name__ == "__main__":
    sys.exit(main())
