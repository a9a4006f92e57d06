"""Command-line driver: configuration, figure-reproduction runs and CSV output.

Every tabular output is CSV with `#`-prefixed metadata lines (package
version, command, config hash, conventions) and numbers in ``%.17g``, so a
given config and seed always produce the same bytes.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import io
import json
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .couplings import (DEFAULT_OMEGA0, CouplingError, CouplingSet, all_to_all, couplings_from_field,
                        couplings_from_json, load_couplings, load_field, save_couplings)
from .dynamics import IntegrationError, TimeGrid, Trajectory, evolve_expm, evolve_ode, evolve_reduced, sector_matrix
from .entanglement import (concurrence, fidelity, multipartite_negativity, half_negativity,
                           sector_half_negativity, sector_multipartite_negativity)
from .hilbert import (N_MAX_FULL, PhysicalityError, PureState, Register, density_to_json, embed_sector,
                      load_pure_state, max_entangled_steady, sector_state, single_excitation_ket, w_state)
from .liouvillian import build_liouvillian, spectrum
from .steady import classify_initial, prediction

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VALIDATION = 0, 2, 3, 4

ENGINES = ("expm", "ode", "reduced")
OBSERVABLES = ("population", "N_n", "N_half", "concurrence", "fidelity")
CONVENTIONS = ("emitter i = bit i-1 (LSB first); column-stacking vec; hbar = 1; time in 1/gamma; "
               "N_half cut A = {1..ceil(n/2)}")
DENSE_FULL_MAX_N = 4
SCAN_MAX_N = 8
RANDOM_MAX_N = 8

S2, S6 = np.sqrt(2), np.sqrt(6)
PRESETS_6 = {
    "r1": np.array([1, -1, 1, -1, 1, -1]) / S6,
    "r2": np.array([8, -8, 1, -1, 8, -8]) / np.sqrt(258),
    "r3": np.array([1, 0, 0, -1, 0, 0]) / S2,
    "r5": np.array([1, 1, 1, -1, -1, 1]) / S6,
}


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

@dataclass
class GridConfig:
    start: float = 0.0
    stop: float = 20.0
    points: int = 401
    spacing: str = "linear"

    def build(self) -> TimeGrid:
        if self.spacing not in ("linear", "log"):
            raise ConfigError(f"grid.spacing: expected 'linear' or 'log', got {self.spacing!r}")
        if self.points < 1:
            raise ConfigError("grid.points must be positive")
        try:
            make = TimeGrid.linear if self.spacing == "linear" else TimeGrid.log
            return make(float(self.start), float(self.stop), int(self.points))
        except ValueError as exc:
            raise ConfigError(f"grid: {exc}") from exc


@dataclass
class CouplingsConfig:
    """``source`` is all_to_all (alpha, g), inline (gamma, g_matrix) or file (path)."""

    source: str = "all_to_all"
    alpha: float = 1.0
    g: float = 0.0
    gamma: list | None = None
    g_matrix: list | None = None
    path: str | None = None


@dataclass
class ExperimentConfig:
    n: int = 6
    omega0: float = DEFAULT_OMEGA0
    couplings: CouplingsConfig = field(default_factory=CouplingsConfig)
    # r1..r6, W, index:<i>, max_entangled:<k> or file:<path>
    initial: str = "r1"
    grid: GridConfig = field(default_factory=GridConfig)
    observables: list = field(default_factory=lambda: ["population", "N_n", "N_half", "fidelity"])
    theory: bool = True
    engine: str = "expm"
    prediction: str = "exact"
    form: str = "collective"
    alphas: list = field(default_factory=lambda: [0.9, 0.95, 0.99, 1.0])
    count: int = 100
    seed: int | None = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _from_mapping(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'}: expected an object, got {type(data).__name__}")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{where or 'config'}: unknown field(s) {', '.join(unknown)}")
    kwargs = {}
    for key, val in data.items():
        path = f"{where}.{key}" if where else key
        if key == "couplings":
            val = _from_mapping(CouplingsConfig, val, path)
        elif key == "grid":
            val = _from_mapping(GridConfig, val, path)
        kwargs[key] = val
    return cls(**kwargs)


def config_from_dict(data: dict) -> ExperimentConfig:
    cfg = _from_mapping(ExperimentConfig, data, "")
    validate_config(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return config_from_dict(data)


def validate_config(cfg: ExperimentConfig) -> None:
    try:
        _validate(cfg)
    except TypeError as exc:
        raise ConfigError(f"config: wrong value type ({exc})") from exc


def _validate(cfg: ExperimentConfig) -> None:
    if not isinstance(cfg.n, int) or isinstance(cfg.n, bool):
        raise ConfigError(f"n: expected an integer, got {cfg.n!r}")
    try:
        Register(cfg.n)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"n: {exc}") from exc
    if cfg.engine not in ENGINES:
        raise ConfigError(f"engine: expected one of {ENGINES}, got {cfg.engine!r}")
    if cfg.prediction not in ("exact", "quasi"):
        raise ConfigError(f"prediction: expected 'exact' or 'quasi', got {cfg.prediction!r}")
    if cfg.form not in ("collective", "per-pair"):
        raise ConfigError(f"form: expected 'collective' or 'per-pair', got {cfg.form!r}")
    bad = [o for o in cfg.observables if o not in OBSERVABLES]
    if bad:
        raise ConfigError(f"observables: unknown {bad}; choose from {OBSERVABLES}")
    if "concurrence" in cfg.observables and cfg.n != 2:
        raise ConfigError("observables: concurrence is defined for n = 2 only")
    if cfg.couplings.source not in ("all_to_all", "inline", "file"):
        raise ConfigError(f"couplings.source: unknown {cfg.couplings.source!r}")
    if cfg.count < 1:
        raise ConfigError("count must be positive")
    cfg.grid.build()
    initial_state(cfg)


def initial_state(cfg: ExperimentConfig) -> PureState:
    label, n = str(cfg.initial), cfg.n
    try:
        if label in PRESETS_6:
            if n != 6:
                raise ConfigError(f"initial: preset {label} is defined for n = 6, not n = {n}")
            return sector_state(n, PRESETS_6[label])
        if label == "r4":
            return single_excitation_ket(1, n)
        if label in ("r6", "W"):
            return w_state(n)
        kind, _, arg = label.partition(":")
        if kind == "index":
            return single_excitation_ket(int(arg), n)
        if kind == "max_entangled":
            return max_entangled_steady(n, int(arg))
        if kind == "file":
            psi = load_pure_state(arg)
            if psi.n != n:
                raise ConfigError(f"initial: {arg} holds an n={psi.n} state, config has n={n}")
            return psi
    except ConfigError:
        raise
    except (ValueError, IndexError, OSError, KeyError) as exc:
        raise ConfigError(f"initial: {exc}") from exc
    raise ConfigError(f"initial: unknown state label {label!r}")


def build_couplings(cfg: ExperimentConfig, alpha: float | None = None) -> CouplingSet:
    cc = cfg.couplings
    try:
        if cc.source == "all_to_all":
            return all_to_all(cfg.n, cc.alpha if alpha is None else alpha, cc.g, cfg.omega0)
        if cc.source == "inline":
            g = cc.g_matrix if cc.g_matrix is not None else np.zeros((cfg.n, cfg.n))
            return couplings_from_json({"n": cfg.n, "omega0": cfg.omega0, "gamma": cc.gamma, "g": g})
        c = load_couplings(cc.path)
    except (CouplingError, OSError, ValueError) as exc:
        raise ConfigError(f"couplings: {exc}") from exc
    if c.n != cfg.n:
        raise ConfigError(f"couplings: file is for n={c.n}, config has n={cfg.n}")
    return c


def effective_alpha(c: CouplingSet) -> float:
    """Mean off-diagonal decoherence, the uniform coupling closest to ``c``."""
    if c.n < 2:
        return 1.0
    off = c.gamma[~np.eye(c.n, dtype=bool)]
    return float(np.clip(off.mean(), 0.0, 1.0))


# --------------------------------------------------------------------------
# runs
# --------------------------------------------------------------------------

def _fmt(x) -> str:
    return "%.17g" % x


def _csv(header: list[str], rows, meta: list[str]) -> str:
    buf = io.StringIO()
    for line in meta:
        buf.write(f"# {line}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(x) for x in row) + "\n")
    return buf.getvalue()


def _meta(cmd: str, cfg: ExperimentConfig) -> list[str]:
    return [f"subradiance {__version__}", f"command: {cmd}", f"config_sha256: {cfg.digest()}",
            f"conventions: {CONVENTIONS}"]


def _warn_g(c: CouplingSet) -> None:
    if np.abs(c.g).max() > 0:
        warnings.warn("coherent couplings are ignored by the long-time predictor", stacklevel=3)


def run_trajectory(cfg: ExperimentConfig, c: CouplingSet, psi0: PureState) -> Trajectory:
    grid = cfg.grid.build()
    if cfg.engine == "reduced":
        return evolve_reduced(c, psi0, grid)
    Register(cfg.n).require_full()
    rep = "dense" if cfg.n <= DENSE_FULL_MAX_N else "sparse"
    L = build_liouvillian(c, form=cfg.form, representation=rep)
    if cfg.engine == "ode":
        return evolve_ode(L, psi0, grid)
    return evolve_expm(L, psi0, grid)


class _Measures:
    """Observables of one state, via the sector block when possible."""

    def __init__(self, n: int):
        self.n = n

    def n_n(self, m, sector: bool) -> float:
        return sector_multipartite_negativity(m) if sector else multipartite_negativity(m)

    def n_half(self, m, sector: bool) -> float:
        return sector_half_negativity(m) if sector else half_negativity(m)

    def concurrence(self, m, sector: bool) -> float:
        return concurrence(embed_sector(m, self.n) if sector else m)


def _state_at(traj: Trajectory, k: int, in_sector: bool):
    return (sector_matrix(traj, k), True) if in_sector else (traj.matrix(k), False)


def run_evolve(cfg: ExperimentConfig, observables=None, theory=None,
               command: str = "evolve", rename=None) -> str:
    obs = list(cfg.observables if observables is None else observables)
    theory = cfg.theory if theory is None else theory
    c = build_couplings(cfg)
    psi0 = initial_state(cfg)
    in_sector = psi0.in_sector()
    if not in_sector and (theory or "fidelity" in obs):
        raise ConfigError("initial: predictions need a single-excitation initial state")
    if not in_sector and cfg.engine == "reduced":
        raise ConfigError("engine: reduced needs a single-excitation initial state")
    if not in_sector and cfg.n > N_MAX_FULL:
        raise ConfigError(f"n={cfg.n} needs a single-excitation initial state")
    pred = None
    if theory or "fidelity" in obs:
        _warn_g(c)
        alpha = 1.0 if cfg.prediction == "exact" else effective_alpha(c)
        pred = prediction(cfg.n, psi0, alpha, cfg.omega0)
    traj = run_trajectory(cfg, c, psi0)
    meas = _Measures(cfg.n)
    a = psi0.sector_coefficients() if in_sector else psi0.amplitudes

    def values(m, sector):
        out = {}
        if "population" in obs:
            out["population"] = float(np.clip(np.real(np.vdot(a, m @ a)), 0.0, 1.0))
        if "N_n" in obs:
            out["N_n"] = meas.n_n(m, sector)
        if "N_half" in obs:
            out["N_half"] = meas.n_half(m, sector)
        if "concurrence" in obs:
            out["concurrence"] = meas.concurrence(m, sector)
        return out

    th_cols = [o for o in obs if o != "fidelity"] if theory else []
    rename = rename or {}
    header = ["t"] + [rename.get(o, o) for o in obs] + [f"{o}_th" for o in th_cols]
    rows = []
    for k, t in enumerate(traj.times):
        m, sec = _state_at(traj, k, in_sector)
        num = values(m, sec)
        p = pred.sector_matrix(t) if pred is not None else None
        if "fidelity" in obs:
            num["fidelity"] = fidelity(m, p if sec else embed_sector(p, cfg.n))
        th = values(p, True) if theory else {}
        rows.append([t] + [num[o] for o in obs] + [th[o] for o in th_cols])
    return _csv(header, rows, _meta(command, cfg))


def run_entanglement(cfg: ExperimentConfig) -> str:
    obs = ["N_n", "N_half"] + (["concurrence"] if cfg.n == 2 else []) + ["fidelity"]
    return run_evolve(cfg, observables=obs, theory=False, command="entanglement",
                      rename={"fidelity": "fidelity_vs_prediction"})


def run_predict(cfg: ExperimentConfig) -> tuple[dict, str]:
    c = build_couplings(cfg)
    psi0 = initial_state(cfg)
    if not psi0.in_sector():
        raise ConfigError("initial: predictions need a single-excitation initial state")
    _warn_g(c)
    alpha = 1.0 if cfg.prediction == "exact" else effective_alpha(c)
    t = cfg.grid.build().times[-1]
    rho = prediction(cfg.n, psi0, alpha, cfg.omega0)
    if cfg.n > N_MAX_FULL:
        raise ConfigError(f"n={cfg.n} too large to write a full density matrix")
    record = density_to_json(rho.at(t))
    cls = classify_initial(cfg.n, psi0, cfg.omega0)
    summary = (f"steady={str(cls.steady).lower()} max_entangled={str(cls.max_entangled).lower()} "
               f"fidelity_initial_final={_fmt(cls.fidelity_initial_final)}")
    return record, summary


def run_spectrum(cfg: ExperimentConfig) -> str:
    c = build_couplings(cfg)
    L = build_liouvillian(c, form=cfg.form, representation="dense")
    ev = spectrum(L).eigenvalues
    return _csv(["re", "im"], ((z.real, z.imag) for z in ev), _meta("spectrum", cfg))


def run_scan(cfg: ExperimentConfig, alphas=None) -> str:
    if cfg.n > SCAN_MAX_N:
        raise ConfigError(f"scan supports n <= {SCAN_MAX_N}")
    if cfg.couplings.source != "all_to_all":
        raise ConfigError("scan sweeps the uniform coupling; couplings.source must be all_to_all")
    alphas = list(cfg.alphas if alphas is None else alphas)
    psi0 = initial_state(cfg)
    if not psi0.in_sector():
        raise ConfigError("initial: scan needs a single-excitation initial state")
    grid = cfg.grid.build()
    rows = []
    for alpha in alphas:
        c = build_couplings(cfg, alpha=float(alpha))
        _warn_g(c)
        pred = prediction(cfg.n, psi0, float(alpha), cfg.omega0)
        traj = evolve_reduced(c, psi0, grid)
        for k, t in enumerate(traj.times):
            m, p = traj.states[k], pred.sector_matrix(t)
            dn = sector_multipartite_negativity(m) - sector_multipartite_negativity(p)
            rows.append([alpha, t, fidelity(m, p), dn])
    return _csv(["alpha", "t", "fidelity", "delta_Nn"], rows, _meta("scan", cfg))


def random_sector_states(n: int, count: int, seed: int) -> list[PureState]:
    """Normalized complex-Gaussian amplitudes on emitters 1..n (no vacuum part)."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    return [sector_state(n, row) for row in z]


def run_random_study(cfg: ExperimentConfig, count=None) -> str:
    if cfg.seed is None:
        raise ConfigError("random-study needs a seed (--seed or config.seed)")
    if cfg.n > RANDOM_MAX_N or cfg.n < 2:
        raise ConfigError(f"random-study supports 2 <= n <= {RANDOM_MAX_N}")
    count = cfg.count if count is None else count
    t = cfg.grid.build().times[-1]
    rows = []
    for psi in random_sector_states(cfg.n, count, cfg.seed):
        c0 = psi.sector_coefficients()
        r0 = np.outer(c0, c0.conj())
        rf = prediction(cfg.n, psi, 1.0, cfg.omega0).sector_matrix(t)
        rows.append([sector_multipartite_negativity(r0), sector_multipartite_negativity(rf),
                     fidelity(r0, rf)])
    meta = _meta("random-study", cfg) + [f"seed: {cfg.seed}", f"count: {count}"]
    return _csv(["N_n_initial", "N_n_final", "fidelity"], rows, meta)


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def _global_flags(p: argparse.ArgumentParser, default) -> None:
    p.add_argument("--config", default=default, help="JSON ExperimentConfig")
    p.add_argument("--seed", type=int, default=default, help="RNG seed (unsigned 64-bit)")
    p.add_argument("--out", default=default, help="output path (default: stdout)")
    p.add_argument("--engine", choices=ENGINES, default=default)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="subradiance", description=__doc__.splitlines()[0])
    _global_flags(p, None)
    # flags may also follow the subcommand; SUPPRESS keeps the top-level value otherwise
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("evolve", "predict", "entanglement", "spectrum", "scan", "random-study", "validate"):
        sub.add_parser(name, parents=[common])
    ing = sub.add_parser("ingest", parents=[common], help="field-response samples -> couplings file")
    ing.add_argument("field", help="JSON {n, response: [[[re, im]]]}")
    ing.add_argument("--normalization", type=float, default=None)
    ing.add_argument("--omega0", type=float, default=DEFAULT_OMEGA0)
    return p


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg.seed = args.seed
    if args.engine:
        cfg.engine = args.engine
    validate_config(cfg)
    return cfg


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "validate":
            from .oracles import validation_suite

            checks = validation_suite()
            _emit("".join(ch.line() + "\n" for ch in checks), args.out)
            return EXIT_OK if all(ch.passed for ch in checks) else EXIT_VALIDATION
        if args.command == "ingest":
            try:
                c = couplings_from_field(load_field(args.field), args.normalization, args.omega0)
            except OSError as exc:
                raise ConfigError(f"cannot read {args.field}: {exc}") from exc
            if args.out:
                save_couplings(c, args.out)
            else:
                from .couplings import couplings_to_json

                sys.stdout.write(json.dumps(couplings_to_json(c), indent=1) + "\n")
            return EXIT_OK
        cfg = _resolve_config(args)
        if args.command == "predict":
            record, summary = run_predict(cfg)
            if args.out:
                Path(args.out).write_text(json.dumps(record))
            else:
                sys.stdout.write(json.dumps(record) + "\n")
            sys.stdout.write(summary + "\n")
            return EXIT_OK
        run = {"evolve": run_evolve, "entanglement": run_entanglement, "spectrum": run_spectrum,
               "scan": run_scan, "random-study": run_random_study}[args.command]
        _emit(run(cfg), args.out)
        return EXIT_OK
    except (ConfigError, CouplingError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, PhysicalityError, ArithmeticError, MemoryError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
