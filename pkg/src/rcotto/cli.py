"""Command-line front end: single cycles, 1-D sweeps and truncation studies, all as CSV."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .linops import NumericalError
from .model import ReservoirSpec, TlsParams
from .otto import (
    TRUNCATION_TOL,
    CouplingModel,
    CycleConfig,
    CycleResult,
    DecouplingMode,
    StrokeMode,
    evaluate,
)

log = logging.getLogger("rcotto")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_UNCONVERGED = 0, 1, 2, 3

CSV_HEADER = (
    "sweep_param,value,coupling_model,stroke_mode,decoupling_mode,"
    "W_out,Q_hot,Q_cold,W_dec_h,W_dec_c,Q_dec_h,Q_dec_c,eta,mode,n,converged"
)
CONVERGE_HEADER = "n,W_out,Q_hot,eta,rel_delta"

FLOAT_KEYS = ("epsilon_h", "epsilon_c", "delta_h", "delta_c", "beta_h", "beta_c", "alpha", "omega_c")
DEFAULTS = {
    "n": "30",
    "coupling_model": CouplingModel.RC_STRONG.value,
    "stroke_mode": StrokeMode.ADIABATIC.value,
    "decoupling_mode": DecouplingMode.INSTANTANEOUS.value,
}
CONFIG_KEYS = FLOAT_KEYS + tuple(DEFAULTS)
SWEEP_PARAMS = ("epsilon_h", "delta_h", "alpha", "beta_c")
CHECK_EVERY = 100  # ledger re-verification stride for sweep rows


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def fmt(x: float) -> str:
    return format(float(x) + 0.0, ".12g")


def _enum(kind, text: str, line: int | None):
    try:
        return kind(text)
    except ValueError:
        allowed = ", ".join(m.value for m in kind)
        raise ConfigError(f"invalid {kind.__name__} {text!r} (expected one of: {allowed})", line) from None


def parse_config_text(text: str) -> CycleConfig:
    """Parse ``key = value`` lines into a :class:`CycleConfig`."""
    raw: dict[str, tuple[str, int | None]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {body!r}", lineno)
        key, value = (part.strip() for part in body.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in raw:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        raw[key] = (value, lineno)

    for key, value in DEFAULTS.items():
        raw.setdefault(key, (value, None))
    missing = [k for k in FLOAT_KEYS if k not in raw]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")

    vals: dict[str, float] = {}
    for key in FLOAT_KEYS:
        value, lineno = raw[key]
        try:
            vals[key] = float(value)
        except ValueError:
            raise ConfigError(f"cannot parse {key} = {value!r} as a number", lineno) from None
        if not math.isfinite(vals[key]):
            raise ConfigError(f"{key} must be finite", lineno)
    n_text, n_line = raw["n"]
    try:
        n = int(n_text)
    except ValueError:
        raise ConfigError(f"cannot parse n = {n_text!r} as an integer", n_line) from None

    def line_of(key):
        return raw[key][1]

    for key in ("beta_h", "beta_c", "omega_c"):
        if vals[key] <= 0:
            raise ConfigError(f"{key} must be > 0", line_of(key))
    if vals["alpha"] < 0:
        raise ConfigError("alpha must be >= 0", line_of("alpha"))
    if n < 1:
        raise ConfigError("n must be >= 1", n_line)
    if vals["beta_c"] <= vals["beta_h"]:
        later = max(line_of("beta_c") or 0, line_of("beta_h") or 0) or None
        raise ConfigError("cold reservoir must be colder (need beta_c > beta_h)", later)
    for eps, dlt in (("epsilon_h", "delta_h"), ("epsilon_c", "delta_c")):
        if vals[eps] == 0 and vals[dlt] == 0:
            raise ConfigError(f"{eps} and {dlt} both zero give a degenerate TLS", line_of(eps))

    return CycleConfig(
        hot=ReservoirSpec(vals["beta_h"], vals["alpha"], vals["omega_c"]),
        cold=ReservoirSpec(vals["beta_c"], vals["alpha"], vals["omega_c"]),
        tls_hot=TlsParams(vals["epsilon_h"], vals["delta_h"]),
        tls_cold=TlsParams(vals["epsilon_c"], vals["delta_c"]),
        n=n,
        coupling_model=_enum(CouplingModel, raw["coupling_model"][0], raw["coupling_model"][1]),
        stroke_mode=_enum(StrokeMode, raw["stroke_mode"][0], raw["stroke_mode"][1]),
        decoupling_mode=_enum(DecouplingMode, raw["decoupling_mode"][0], raw["decoupling_mode"][1]),
    )


def parse_config(path) -> CycleConfig:
    return parse_config_text(Path(path).read_text())


def format_config(cfg: CycleConfig) -> str:
    """Inverse of :func:`parse_config_text` for configs sharing alpha and omega_c."""
    if (cfg.hot.alpha, cfg.hot.omega_c) != (cfg.cold.alpha, cfg.cold.omega_c):
        raise ValueError("config file format has a single alpha and omega_c for both reservoirs")
    exact = repr  # shortest text that parses back to the same float
    pairs = [
        ("epsilon_h", exact(cfg.tls_hot.epsilon)), ("epsilon_c", exact(cfg.tls_cold.epsilon)),
        ("delta_h", exact(cfg.tls_hot.delta)), ("delta_c", exact(cfg.tls_cold.delta)),
        ("beta_h", exact(cfg.hot.beta)), ("beta_c", exact(cfg.cold.beta)),
        ("alpha", exact(cfg.hot.alpha)), ("omega_c", exact(cfg.hot.omega_c)),
        ("n", str(cfg.n)),
        ("coupling_model", cfg.coupling_model.value),
        ("stroke_mode", cfg.stroke_mode.value),
        ("decoupling_mode", cfg.decoupling_mode.value),
    ]
    return "".join(f"{k} = {v}\n" for k, v in pairs)


@dataclass(frozen=True)
class CsvRow:
    sweep_param: str
    value: float | None
    coupling_model: CouplingModel
    stroke_mode: StrokeMode
    decoupling_mode: DecouplingMode
    W_out: float
    Q_hot: float
    Q_cold: float
    W_dec_h: float
    W_dec_c: float
    Q_dec_h: float
    Q_dec_c: float
    eta: float | None
    mode: str
    n: int
    converged: bool

    @classmethod
    def from_result(cls, cfg: CycleConfig, res: CycleResult, sweep_param: str = "none",
                    value: float | None = None) -> "CsvRow":
        return cls(
            sweep_param=sweep_param, value=value,
            coupling_model=cfg.coupling_model, stroke_mode=cfg.stroke_mode,
            decoupling_mode=cfg.decoupling_mode,
            W_out=res.w_out, Q_hot=res.q_hot, Q_cold=res.q_cold,
            W_dec_h=res.w_decouple_hot, W_dec_c=res.w_decouple_cold,
            Q_dec_h=res.q_decouple_hot, Q_dec_c=res.q_decouple_cold,
            eta=res.eta, mode=res.mode.value, n=res.n, converged=res.converged,
        )

    def to_csv(self) -> str:
        cells = [
            self.sweep_param,
            "" if self.value is None else fmt(self.value),
            self.coupling_model.value, self.stroke_mode.value, self.decoupling_mode.value,
            *(fmt(x) for x in (self.W_out, self.Q_hot, self.Q_cold, self.W_dec_h,
                               self.W_dec_c, self.Q_dec_h, self.Q_dec_c)),
            "" if self.eta is None else fmt(self.eta),
            self.mode,
            str(self.n),
            "true" if self.converged else "false",
        ]
        return ",".join(cells)


Variant = tuple[CouplingModel, StrokeMode, DecouplingMode]


def parse_variants(text: str) -> list[Variant]:
    """``model:stroke:decoupling`` triples separated by commas, e.g. ``weak:adiabatic:instantaneous``."""
    out = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        parts = item.split(":")
        if len(parts) != 3:
            raise ConfigError(f"variant {item!r} must be coupling_model:stroke_mode:decoupling_mode")
        out.append((
            _enum(CouplingModel, parts[0], None),
            _enum(StrokeMode, parts[1], None),
            _enum(DecouplingMode, parts[2], None),
        ))
    if not out:
        raise ConfigError("empty variant list")
    return out


def apply_variant(cfg: CycleConfig, v: Variant) -> CycleConfig:
    return replace(cfg, coupling_model=v[0], stroke_mode=v[1], decoupling_mode=v[2])


def set_param(cfg: CycleConfig, param: str, value: float) -> CycleConfig:
    if param == "epsilon_h":
        return replace(cfg, tls_hot=replace(cfg.tls_hot, epsilon=value))
    if param == "delta_h":
        return replace(cfg, tls_hot=replace(cfg.tls_hot, delta=value))
    if param == "alpha":
        # One coupling strength shared by both reservoirs.
        return replace(cfg, hot=replace(cfg.hot, alpha=value), cold=replace(cfg.cold, alpha=value))
    if param == "beta_c":
        return replace(cfg, cold=replace(cfg.cold, beta=value))
    raise ConfigError(f"unknown sweep parameter {param!r} (expected one of: {', '.join(SWEEP_PARAMS)})")


@dataclass(frozen=True)
class SweepSpec:
    param: str
    start: float
    stop: float
    steps: int
    base: CycleConfig
    variants: list[Variant] = field(default_factory=list)

    def __post_init__(self):
        if self.param not in SWEEP_PARAMS:
            raise ConfigError(f"unknown sweep parameter {self.param!r} (expected one of: {', '.join(SWEEP_PARAMS)})")
        if not self.start < self.stop:
            raise ConfigError(f"sweep needs from < to, got {self.start} >= {self.stop}")
        if self.steps < 2:
            raise ConfigError(f"sweep needs steps >= 2, got {self.steps}")
        if not self.variants:
            v = (self.base.coupling_model, self.base.stroke_mode, self.base.decoupling_mode)
            object.__setattr__(self, "variants", [v])

    def grid(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)

    def configs(self) -> list[tuple[Variant, float, CycleConfig]]:
        """All grid points, ordered by (variant, value); invalid points raise ConfigError."""
        out = []
        for v in self.variants:
            for x in self.grid():
                try:
                    cfg = apply_variant(set_param(self.base, self.param, float(x)), v)
                except ValueError as exc:
                    if isinstance(exc, ConfigError):
                        raise
                    raise ConfigError(f"{self.param} = {fmt(x)}: {exc}") from exc
                out.append((v, float(x), cfg))
        return out


def _evaluate_point(cfg: CycleConfig) -> CycleResult:
    return evaluate(cfg)


def run_cycle(cfg: CycleConfig) -> CsvRow:
    return CsvRow.from_result(cfg, evaluate(cfg))


def sweep_rows(spec: SweepSpec, workers: int = 1) -> list[CsvRow]:
    points = spec.configs()
    cfgs = [c for _, _, c in points]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_evaluate_point, cfgs, chunksize=max(1, len(cfgs) // (4 * workers))))
    else:
        results = [_evaluate_point(c) for c in cfgs]

    rows = []
    for i, ((_, x, cfg), res) in enumerate(zip(points, results)):
        if abs(res.first_law_residual) > 1e-10 or abs(res.points.loop_residual()) > 1e-10:
            raise NumericalError(f"ledger does not close at {spec.param} = {fmt(x)}")
        if i % CHECK_EVERY == 0 and evaluate(cfg) != res:
            raise NumericalError(f"non-reproducible evaluation at {spec.param} = {fmt(x)}")
        rows.append(CsvRow.from_result(cfg, res, spec.param, x))
    return rows


def render_csv(rows: list[CsvRow]) -> str:
    return "".join(line + "\n" for line in [CSV_HEADER, *(r.to_csv() for r in rows)])


def run_sweep(spec: SweepSpec, out, workers: int = 1) -> list[CsvRow]:
    rows = sweep_rows(spec, workers)
    text = render_csv(rows)
    with open(out, "w", newline="") as fh:
        fh.write(text)
    return rows


@dataclass(frozen=True)
class ConvergeRow:
    n: int
    W_out: float
    Q_hot: float
    eta: float | None
    rel_delta: float | None

    @property
    def converged(self) -> bool:
        return self.rel_delta is not None and self.rel_delta <= TRUNCATION_TOL

    def to_csv(self) -> str:
        eta = "" if self.eta is None else fmt(self.eta)
        rel = "" if self.rel_delta is None else fmt(self.rel_delta)
        return f"{self.n},{fmt(self.W_out)},{fmt(self.Q_hot)},{eta},{rel}"


def _rel_change(new: float, old: float) -> float:
    diff = abs(new - old)
    if diff == 0.0:
        return 0.0
    return diff / max(abs(new), abs(old))


def run_converge(cfg: CycleConfig, n_max: int) -> list[ConvergeRow]:
    """Cycle results for n = 5, 10, ..., n_max with the relative change against the previous row."""
    if n_max < cfg.n:
        raise ConfigError(f"n_max = {n_max} is below the configured truncation n = {cfg.n}")
    rows: list[ConvergeRow] = []
    prev = None
    for n in range(5, n_max + 1, 5):
        res = evaluate(replace(cfg, n=n))
        rel = None
        if prev is not None:
            rel = max(_rel_change(res.w_out, prev.w_out), _rel_change(res.q_hot, prev.q_hot))
        rows.append(ConvergeRow(n, res.w_out, res.q_hot, res.eta, rel))
        prev = res
    return rows


def converged_at(rows: list[ConvergeRow], n: int) -> bool:
    """True if the study row at (or just below) truncation ``n`` meets the tolerance."""
    eligible = [r for r in rows if r.n <= n]
    return bool(eligible) and eligible[-1].converged


def render_converge(rows: list[ConvergeRow]) -> str:
    return "".join(line + "\n" for line in [CONVERGE_HEADER, *(r.to_csv() for r in rows)])


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rcotto", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, metavar="PATH")
        p.add_argument("--out", metavar="PATH", help="write CSV here instead of standard output")
        p.add_argument("--allow-unconverged", action="store_true",
                       help="exit 0 even if a truncation check fails")

    p = sub.add_parser("cycle", help="evaluate one cycle and print a CSV row")
    common(p)

    p = sub.add_parser("sweep", help="1-D parameter sweep to CSV")
    common(p)
    p.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--variants", help="comma-separated model:stroke:decoupling triples (default: from config)")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("converge", help="truncation convergence study")
    common(p)
    p.add_argument("--n-max", type=int, required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = parse_config(args.config)
        if args.command == "cycle":
            row = run_cycle(cfg)
            _emit(render_csv([row]), args.out)
            ok = row.converged
        elif args.command == "sweep":
            variants = parse_variants(args.variants) if args.variants else []
            spec = SweepSpec(args.param, args.start, args.stop, args.steps, cfg, variants)
            rows = sweep_rows(spec, max(1, args.workers))
            _emit(render_csv(rows), args.out)
            bad = [r for r in rows if not r.converged]
            for r in bad:
                log.warning("unconverged truncation at %s = %s (%s)", r.sweep_param, fmt(r.value), r.coupling_model.value)
            ok = not bad
        else:
            rows = run_converge(cfg, args.n_max)
            _emit(render_converge(rows), args.out)
            ok = converged_at(rows, cfg.n)
            log.info("truncation n = %d %s", cfg.n, "converged" if ok else "NOT converged")
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except (NumericalError, ValueError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    if not ok and not args.allow_unconverged:
        log.error("truncation not converged; pass --allow-unconverged to accept")
        return EXIT_UNCONVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
