"""Experiment drivers: convergence, stability, and timing studies.

Each driver builds its sample set, runs the requested steppers, and can
emit CSV tables plus a sample manifest so a run is reproducible from its
output directory alone.  Numeric CSV fields are written with ``repr`` so
identical configurations produce byte-identical files (timing columns are
exempt from that contract).
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, replace

import numpy as np

from .manufactured import attach_manufactured_forcing, residual_gate
from .mesh import build_two_domain_mesh
from .sampling import (
    SampleSpec,
    SampleSet,
    Uniform,
    case1_samples,
    case2_samples,
    draw_samples,
    write_sample_manifest,
)
from .stepping import (
    NumericalFailure,
    ProblemSpec,
    RunDiagnostics,
    StepperConfig,
    make_stepper,
    run as run_stepper,
)

# Default study ensemble: three frictions spanning four decades and three
# sinusoidal diffusion amplitudes.
DEFAULT_KAPPAS = (0.01, 1.0, 10.0)
DEFAULT_EPSILONS = (0.6207, 0.1841, 0.2691)


class ConfigError(ValueError):
    """Invalid run configuration (unknown key, bad value, missing file)."""


@dataclass
class RunConfig:
    """Validated configuration for one experiment invocation."""

    experiment: str = "converge"       # converge | stability | timing | run
    algo: str = "all"                  # a1 | a2 | a3 | baseline | all
    mesh: tuple = (4, 8, 16, 32)
    dt: tuple | None = None            # stability sweep or fixed step
    T: float | None = None             # default depends on the experiment
    J: int = 3
    seed: int = 0
    out: str | None = None
    solver: str = "cholesky"
    sizes: tuple = (1, 5, 10)          # timing ensemble sizes (per axis)
    timing_repeats: int = 3
    timing_warmup: bool = True
    energy_mode: str = "mean-then-norm"

    def algorithms(self, available=("a1", "a2", "a3")) -> tuple:
        if self.algo == "all":
            return tuple(available)
        if self.algo not in ("a1", "a2", "a3", "baseline"):
            raise ConfigError(f"unknown algorithm {self.algo!r}")
        return (self.algo,)


_CONFIG_KEYS = {
    "experiment": str,
    "algo": str,
    "mesh": "int_list",
    "dt": "float_list",
    "T": float,
    "J": int,
    "seed": int,
    "out": str,
    "solver": str,
    "sizes": "int_list",
    "timing_repeats": int,
    "timing_warmup": "bool",
    "energy_mode": str,
}


def _parse_value(key: str, raw: str):
    kind = _CONFIG_KEYS[key]
    try:
        if kind == "int_list":
            return tuple(int(v) for v in raw.split(",") if v.strip())
        if kind == "float_list":
            return tuple(float(v) for v in raw.split(",") if v.strip())
        if kind == "bool":
            if raw.lower() in ("1", "true", "yes"):
                return True
            if raw.lower() in ("0", "false", "no"):
                return False
            raise ValueError(raw)
        return kind(raw)
    except ValueError as e:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from e


def load_config(path: str, base: RunConfig | None = None) -> RunConfig:
    """Flat key=value config file; '#' starts a comment; unknown keys are
    rejected."""
    cfg = base or RunConfig()
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    updates = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, raw = (part.strip() for part in line.split("=", 1))
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            updates[key] = _parse_value(key, raw)
    return replace(cfg, **updates)


# -- rate arithmetic -------------------------------------------------------------


def compute_rates(errors) -> np.ndarray:
    """log2 ratios of successive errors under mesh halving.

    Nonpositive errors yield NaN markers rather than raising.
    """
    e = np.asarray(errors, dtype=np.float64)
    if len(e) < 2:
        raise ValueError("need at least two refinement levels")
    rates = np.full(len(e) - 1, np.nan)
    for k in range(len(e) - 1):
        if e[k] > 0.0 and e[k + 1] > 0.0:
            rates[k] = math.log2(e[k] / e[k + 1])
    return rates


# -- sample-set builders ----------------------------------------------------------


def convergence_samples(algorithm: str, horizon: float) -> SampleSet:
    if algorithm == "a1":
        return case1_samples(DEFAULT_KAPPAS, nu_const=1.0, horizon=horizon)
    return case2_samples(DEFAULT_KAPPAS, DEFAULT_EPSILONS, horizon=horizon)


def timing_samples(J: int, seed: int, horizon: float) -> SampleSet:
    """Drawn friction 0.01 + U(0,1) and diffusion 1 + (1 + U(0,1)) sin t,
    paired into a J x J ensemble."""
    spec = SampleSpec(
        kappa=Uniform(0.01, 1.01),
        nu_kind="sinusoidal",
        nu_base=1.0,
        nu_amplitude=Uniform(1.0, 2.0),
        tensor=True,
        horizon=horizon,
    )
    return draw_samples(spec, J, seed)


def stability_samples(algorithm: str, J: int, seed: int, horizon: float) -> SampleSet:
    """Zero-forcing decay study ensemble.

    Friction is 0.01 + U(0,1) as in the timing setup.  The sinusoidal
    diffusion amplitude is drawn from U(0,1) so the coefficient stays
    strictly positive over long horizons; the deterministic-diffusion
    algorithm gets a constant unit coefficient instead.
    """
    nu_kind = "constant" if algorithm == "a1" else "sinusoidal"
    spec = SampleSpec(
        kappa=Uniform(0.01, 1.01),
        nu_kind=nu_kind,
        nu_base=1.0,
        nu_amplitude=None if algorithm == "a1" else Uniform(0.0, 1.0),
        tensor=True,
        horizon=horizon,
    )
    return draw_samples(spec, J, seed)


# -- convergence study -------------------------------------------------------------


@dataclass
class AlgoConvergence:
    """Relative errors (error over the exact solution's norm at the final
    time, seminorm for H1) per refinement level and sample."""

    algorithm: str
    ns: tuple                  # cells per unit length at each level
    l2_u1: np.ndarray          # (levels, J)
    h1_u1: np.ndarray
    l2_u2: np.ndarray
    h1_u2: np.ndarray
    factorizations: list
    max_residuals: list

    def errors(self, field: str, norm: str) -> np.ndarray:
        return getattr(self, f"{norm}_{field}")

    def rates(self, field: str, norm: str) -> np.ndarray:
        e = self.errors(field, norm)
        return np.stack([compute_rates(e[:, j]) for j in range(e.shape[1])], axis=1)


@dataclass
class ConvergenceResult:
    per_algo: dict
    gate_residual: float


def run_convergence_study(config: RunConfig) -> ConvergenceResult:
    """Mesh refinement study with dt = h^2 on the smooth reference problem.

    For each algorithm and each mesh level the run advances to T with the
    per-sample forcing derived from the reference solution, then measures
    per-sample L2 and H1 errors of both fields at the final time.
    """
    T = config.T if config.T is not None else 1.0
    algos = config.algorithms(("a1", "a2", "a3"))
    gate_worst = 0.0
    per_algo = {}
    for algo in algos:
        samples = convergence_samples(algo, horizon=T)
        family = attach_manufactured_forcing(samples, a=1.0)
        worst = residual_gate(family)
        gate_worst = max(gate_worst, worst)
        if worst > 1e-8:
            raise NumericalFailure(
                f"derived forcing failed the residual gate: {worst:.3e}"
            )
        levels = config.mesh
        J = samples.J
        l2_u1 = np.zeros((len(levels), J))
        h1_u1 = np.zeros((len(levels), J))
        l2_u2 = np.zeros((len(levels), J))
        h1_u2 = np.zeros((len(levels), J))
        facts = []
        residuals = []
        for li, n in enumerate(levels):
            mesh = build_two_domain_mesh(n)
            dt = (1.0 / n) ** 2
            cfg = StepperConfig(dt=dt, T=T, algorithm=algo, solver=config.solver,
                                energy_mode=config.energy_mode)
            problem = ProblemSpec(
                samples=samples,
                u0_1=lambda x, y, j, fam=family: fam[j].u1(x, y, 0.0),
                u0_2=lambda x, y, j, fam=family: fam[j].u2(x, y, 0.0),
                dirichlet=0.0,
                manufactured=family,
            )
            state, diag = run_stepper(mesh, problem, cfg)
            facts.append(diag.factorization_count)
            residuals.append(max(diag.max_residuals) if diag.max_residuals else 0.0)
            s1, s2 = state.spaces
            z1 = np.zeros(s1.ndof)
            z2 = np.zeros(s2.ndof)
            for j in range(J):
                ms = family[j]
                # Relative errors: the zero-field "error" is the quadrature
                # norm of the exact solution itself.
                l2_u1[li, j] = s1.error_l2(state.u1[:, j], ms.u1, T) / s1.error_l2(z1, ms.u1, T)
                h1_u1[li, j] = s1.error_h1(state.u1[:, j], ms.grad_u1, T) / s1.error_h1(z1, ms.grad_u1, T)
                l2_u2[li, j] = s2.error_l2(state.u2[:, j], ms.u2, T) / s2.error_l2(z2, ms.u2, T)
                h1_u2[li, j] = s2.error_h1(state.u2[:, j], ms.grad_u2, T) / s2.error_h1(z2, ms.grad_u2, T)
        per_algo[algo] = AlgoConvergence(
            algorithm=algo, ns=tuple(levels),
            l2_u1=l2_u1, h1_u1=h1_u1, l2_u2=l2_u2, h1_u2=h1_u2,
            factorizations=facts, max_residuals=residuals,
        )
    result = ConvergenceResult(per_algo=per_algo, gate_residual=gate_worst)
    if config.out:
        write_convergence_outputs(config, result)
    return result


# -- stability study -----------------------------------------------------------------


@dataclass
class StabilitySeries:
    algorithm: str
    dt: float
    times: np.ndarray
    energies: np.ndarray
    diagnostics: RunDiagnostics
    samples: SampleSet

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.energies) <= 0.0))

    @property
    def final_ratio(self) -> float:
        return float(self.energies[-1] / self.energies[0])


@dataclass
class StabilityResult:
    series: list


def run_stability_study(config: RunConfig) -> StabilityResult:
    """Zero-forcing energy decay across a sweep of time step sizes."""
    T = config.T if config.T is not None else 10.0
    dts = config.dt if config.dt else (0.2, 0.1, 0.05, 0.02, 0.01)
    n = config.mesh[0] if config.mesh else 32
    mesh = build_two_domain_mesh(n)
    out = []
    for algo in config.algorithms(("a1", "a2", "a3")):
        samples = stability_samples(algo, config.J, config.seed, horizon=T)
        problem = ProblemSpec(samples=samples, u0_1=1.0, u0_2=1.0, dirichlet=0.0)
        for dt in dts:
            cfg = StepperConfig(dt=dt, T=T, algorithm=algo, solver=config.solver,
                                energy_mode=config.energy_mode)
            _, diag = run_stepper(mesh, problem, cfg)
            out.append(
                StabilitySeries(
                    algorithm=algo,
                    dt=dt,
                    times=np.asarray(diag.times),
                    energies=np.asarray(diag.energies),
                    diagnostics=diag,
                    samples=samples,
                )
            )
    result = StabilityResult(series=out)
    if config.out:
        write_stability_outputs(config, result)
    return result


# -- timing study ---------------------------------------------------------------------


@dataclass
class TimingRow:
    size: int                # per-axis sample count (ensemble is size^2)
    algorithm: str
    seconds: float           # median wall time over the measured repeats
    factorizations: int
    all_seconds: tuple


@dataclass
class TimingResult:
    rows: list
    n: int
    dt: float
    T: float

    def seconds(self, size: int, algorithm: str) -> float:
        for r in self.rows:
            if r.size == size and r.algorithm == algorithm:
                return r.seconds
        raise KeyError((size, algorithm))

    def savings(self, size: int, algorithm: str) -> float:
        base = self.seconds(size, "baseline")
        return 1.0 - self.seconds(size, algorithm) / base


def run_timing_study(config: RunConfig, algorithms=("baseline", "a2", "a3")) -> TimingResult:
    """Wall-time comparison of the shared-matrix steppers vs the per-sample
    baseline at fixed mesh size.

    The clock wraps the time loop only (mesh construction excluded); one
    warmup run is discarded and the median of ``timing_repeats`` runs is
    reported.
    """
    n = config.mesh[0] if config.mesh else 32
    T = config.T if config.T is not None else 0.5
    dt = config.dt[0] if config.dt else 0.02
    mesh = build_two_domain_mesh(n)
    rows = []
    for size in config.sizes:
        samples = timing_samples(size, config.seed, horizon=T)
        attach_manufactured_forcing(samples, a=1.0)
        problem = ProblemSpec(samples=samples, u0_1=1.0, u0_2=1.0, dirichlet=0.0)
        for algo in algorithms:
            cfg = StepperConfig(dt=dt, T=T, algorithm=algo, solver=config.solver,
                                energy_mode=config.energy_mode)
            reps = max(1, config.timing_repeats)
            n_runs = reps + (1 if config.timing_warmup else 0)
            wall = []
            fact = 0
            for r in range(n_runs):
                stepper = make_stepper(mesh, problem, cfg)
                t0 = time.perf_counter()
                _, diag = stepper.run()
                wall.append(diag.wall_time_s)
                fact = diag.factorization_count
            measured = wall[1:] if config.timing_warmup and len(wall) > 1 else wall
            rows.append(
                TimingRow(
                    size=size,
                    algorithm=algo,
                    seconds=float(np.median(measured)),
                    factorizations=fact,
                    all_seconds=tuple(measured),
                )
            )
    result = TimingResult(rows=rows, n=n, dt=dt, T=T)
    if config.out:
        write_timing_outputs(config, result)
    return result


# -- output writers ----------------------------------------------------------------------


def _fmt(x) -> str:
    return repr(float(x))


def _ensure_out(config: RunConfig) -> str:
    os.makedirs(config.out, exist_ok=True)
    return config.out


def write_manifest(config: RunConfig, extra: dict, path: str) -> None:
    with open(path, "w") as fh:
        fh.write("# run manifest\n")
        for key in sorted(_CONFIG_KEYS):
            fh.write(f"{key} = {getattr(config, key)!r}\n")
        for key, val in extra.items():
            fh.write(f"{key} = {val!r}\n")


def write_convergence_outputs(config: RunConfig, result: ConvergenceResult) -> None:
    out = _ensure_out(config)
    for norm in ("l2", "h1"):
        with open(os.path.join(out, f"table_{norm}.csv"), "w") as fh:
            maxj = max(a.l2_u1.shape[1] for a in result.per_algo.values())
            cols = ",".join(f"s{j}" for j in range(maxj))
            fh.write(f"algo,h,field,{cols}\n")
            for algo, data in result.per_algo.items():
                for field_name in ("u1", "u2"):
                    e = data.errors(field_name, norm)
                    for li, n in enumerate(data.ns):
                        vals = ",".join(_fmt(v) for v in e[li])
                        fh.write(f"{algo},1/{n},{field_name},{vals}\n")
    with open(os.path.join(out, "rates.csv"), "w") as fh:
        fh.write("algo,norm,field,sample,pair,rate\n")
        for algo, data in result.per_algo.items():
            if len(data.ns) < 2:
                continue
            for norm in ("l2", "h1"):
                for field_name in ("u1", "u2"):
                    rates = data.rates(field_name, norm)
                    for k in range(rates.shape[0]):
                        pair = f"1/{data.ns[k]}->1/{data.ns[k + 1]}"
                        for j in range(rates.shape[1]):
                            fh.write(
                                f"{algo},{norm},{field_name},{j},{pair},{_fmt(rates[k, j])}\n"
                            )
    for algo in result.per_algo:
        samples = convergence_samples(algo, horizon=config.T or 1.0)
        with open(os.path.join(out, f"samples_{algo}.txt"), "w") as fh:
            write_sample_manifest(samples, fh)
    write_manifest(
        config,
        {
            "gate_residual": result.gate_residual,
            "factorizations": {a: d.factorizations for a, d in result.per_algo.items()},
        },
        os.path.join(out, "manifest.txt"),
    )


def write_stability_outputs(config: RunConfig, result: StabilityResult) -> None:
    out = _ensure_out(config)
    for s in result.series:
        name = f"energy_{s.algorithm}_dt{s.dt:g}.dat"
        with open(os.path.join(out, name), "w") as fh:
            fh.write("# t energy\n")
            for t, e in zip(s.times, s.energies):
                fh.write(f"{_fmt(t)} {_fmt(e)}\n")
            fh.write(f"# monotone = {s.monotone}\n")
            fh.write(f"# final_over_initial = {_fmt(s.final_ratio)}\n")
    # One sample manifest per algorithm: the deterministic-diffusion
    # stepper draws a different ensemble than the mean-diffusion ones.
    for algo in {s.algorithm for s in result.series}:
        first = next(s for s in result.series if s.algorithm == algo)
        with open(os.path.join(out, f"samples_{algo}.txt"), "w") as fh:
            write_sample_manifest(first.samples, fh)
    write_manifest(
        config,
        {"series": [(s.algorithm, s.dt, s.monotone) for s in result.series]},
        os.path.join(out, "manifest.txt"),
    )


def write_timing_outputs(config: RunConfig, result: TimingResult) -> None:
    out = _ensure_out(config)
    with open(os.path.join(out, "timing.csv"), "w") as fh:
        fh.write("size,ensemble,algorithm,seconds,factorizations,savings_vs_baseline\n")
        for r in result.rows:
            try:
                sav = result.savings(r.size, r.algorithm)
            except KeyError:
                sav = 0.0
            fh.write(
                f"{r.size},{r.size * r.size},{r.algorithm},{r.seconds!r},"
                f"{r.factorizations},{sav!r}\n"
            )
    write_manifest(config, {"mesh_n": result.n, "dt": result.dt, "T": result.T},
                   os.path.join(out, "manifest.txt"))


def write_diagnostics_csv(diag: RunDiagnostics, path: str) -> None:
    """Per-step stream: step, time, energy, max residual, phase millis.

    The three trailing milliseconds columns are timing data and are not
    covered by the byte-reproducibility contract.
    """
    with open(path, "w") as fh:
        fh.write("step,time,energy,max_residual,assembly_ms,factorize_ms,solve_ms\n")
        for row in diag.as_rows():
            k, t, e, res, a_ms, f_ms, s_ms = row
            fh.write(
                f"{k},{_fmt(t)},{_fmt(e)},{_fmt(res)},{a_ms!r},{f_ms!r},{s_ms!r}\n"
            )


def run_single(config: RunConfig) -> tuple:
    """The ``run`` experiment: one algorithm, one mesh, manufactured data."""
    T = config.T if config.T is not None else 1.0
    n = config.mesh[0] if config.mesh else 8
    algo = config.algo if config.algo != "all" else "a2"
    samples = convergence_samples(algo, horizon=T)
    family = attach_manufactured_forcing(samples, a=1.0)
    mesh = build_two_domain_mesh(n)
    dt = config.dt[0] if config.dt else (1.0 / n) ** 2
    cfg = StepperConfig(dt=dt, T=T, algorithm=algo, solver=config.solver,
                        energy_mode=config.energy_mode)
    problem = ProblemSpec(
        samples=samples,
        u0_1=lambda x, y, j, fam=family: fam[j].u1(x, y, 0.0),
        u0_2=lambda x, y, j, fam=family: fam[j].u2(x, y, 0.0),
        dirichlet=0.0,
        manufactured=family,
    )
    state, diag = run_stepper(mesh, problem, cfg)
    if config.out:
        out = _ensure_out(config)
        write_diagnostics_csv(diag, os.path.join(out, "diagnostics.csv"))
        with open(os.path.join(out, "samples_run.txt"), "w") as fh:
            write_sample_manifest(samples, fh)
        write_manifest(
            config,
            {"factorizations": diag.factorization_count, "steps": cfg.N},
            os.path.join(out, "manifest.txt"),
        )
    return state, diag
