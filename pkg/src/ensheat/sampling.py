"""Random coefficient families, sample sets, and ensemble aggregates.

A sample set holds J realizations of the interface friction kappa and of
the two diffusion coefficient fields, plus optional per-sample forcing.
Diffusion fields must stay strictly positive over the configured time
horizon; this is checked at construction against each family's analytic
minimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Constant:
    """Spatially and temporally constant coefficient."""

    c: float

    spatially_constant = True
    time_dependent = False

    def __call__(self, x, y, t):
        return self.c + 0.0 * np.asarray(x, dtype=np.float64)

    def at_time(self, t: float) -> float:
        return self.c

    def dt_at_time(self, t: float) -> float:
        return 0.0

    def minimum_on(self, horizon: float) -> float:
        return self.c

    def describe(self) -> str:
        return f"constant(c={self.c!r})"


def _sin_min(T: float) -> float:
    """min of sin over [0, T] for T >= 0."""
    if T >= 1.5 * math.pi:
        return -1.0
    if T <= math.pi:
        return min(0.0, math.sin(T))
    return math.sin(T)


def _sin_max(T: float) -> float:
    if T >= 0.5 * math.pi:
        return 1.0
    return math.sin(T)


@dataclass(frozen=True)
class SinusoidalInTime:
    """base + amplitude * sin(t), constant in space."""

    base: float
    amplitude: float

    spatially_constant = True
    time_dependent = True

    def __call__(self, x, y, t):
        return self.at_time(t) + 0.0 * np.asarray(x, dtype=np.float64)

    def at_time(self, t: float):
        return self.base + self.amplitude * np.sin(t)

    def dt_at_time(self, t: float):
        return self.amplitude * np.cos(t)

    def minimum_on(self, horizon: float) -> float:
        lo = self.amplitude * _sin_min(horizon)
        hi = self.amplitude * _sin_max(horizon)
        return self.base + min(lo, hi)

    def describe(self) -> str:
        return f"sinusoidal(base={self.base!r}, amplitude={self.amplitude!r})"


@dataclass(frozen=True)
class AffineInOmega:
    """a + b * omega for a drawn realization omega; constant in space/time."""

    a: float
    b: float
    omega: float

    spatially_constant = True
    time_dependent = False

    def __call__(self, x, y, t):
        return self.at_time(t) + 0.0 * np.asarray(x, dtype=np.float64)

    def at_time(self, t: float) -> float:
        return self.a + self.b * self.omega

    def dt_at_time(self, t: float) -> float:
        return 0.0

    def minimum_on(self, horizon: float) -> float:
        return self.a + self.b * self.omega

    def describe(self) -> str:
        return f"affine(a={self.a!r}, b={self.b!r}, omega={self.omega!r})"


CoefficientField = Constant | SinusoidalInTime | AffineInOmega


# -- distributions over sample parameters --------------------------------------


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def draw(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if not self.hi > self.lo:
            raise ValueError(f"invalid uniform bounds [{self.lo}, {self.hi}]")
        return rng.uniform(self.lo, self.hi, size=count)

    def describe(self) -> str:
        return f"uniform({self.lo!r}, {self.hi!r})"


@dataclass(frozen=True)
class Explicit:
    """Tabulated sample values used verbatim (cycled if count exceeds them)."""

    values: tuple

    def draw(self, rng: np.random.Generator, count: int) -> np.ndarray:
        vals = np.asarray(self.values, dtype=np.float64)
        if len(vals) < count:
            raise ValueError(f"{count} samples requested but only {len(vals)} tabulated")
        return vals[:count].copy()

    def describe(self) -> str:
        return f"explicit({list(self.values)!r})"


@dataclass(frozen=True)
class SampleSpec:
    """What to draw: kappa per sample, and the diffusion family.

    ``nu_kind`` selects the field family shared by both subdomains:
    "constant" uses ``nu_base``; "sinusoidal" uses base ``nu_base`` and a
    per-sample amplitude from ``nu_amplitude``.  With ``tensor=True`` the J
    kappa draws and J diffusion draws are paired into J*J samples
    (kappa-major order).
    """

    kappa: Uniform | Explicit
    nu_kind: str = "constant"
    nu_base: float = 1.0
    nu_amplitude: Uniform | Explicit | None = None
    tensor: bool = False
    horizon: float = 1.0


@dataclass(eq=False)
class SampleSet:
    """J realizations of (kappa_j, nu1_j, nu2_j) with optional forcing."""

    J: int
    kappa: np.ndarray
    nu1: list
    nu2: list
    f1: list = None
    f2: list = None
    seed: int | None = None
    horizon: float = 1.0
    spec: SampleSpec | None = None

    def __post_init__(self):
        self.kappa = np.asarray(self.kappa, dtype=np.float64)
        if self.J != len(self.kappa) or self.J != len(self.nu1) or self.J != len(self.nu2):
            raise ValueError("sample lists must all have length J")
        if np.any(self.kappa <= 0.0):
            raise ValueError("friction parameters must be positive")
        for j, (a, b) in enumerate(zip(self.nu1, self.nu2)):
            for f in (a, b):
                m = f.minimum_on(self.horizon)
                if m <= 0.0:
                    raise ValueError(
                        f"diffusion field of sample {j} is not strictly positive "
                        f"on [0, {self.horizon}]: analytic minimum {m}"
                    )
        if self.f1 is None:
            self.f1 = [None] * self.J
        if self.f2 is None:
            self.f2 = [None] * self.J

    @property
    def kappa_max(self) -> float:
        return float(self.kappa.max())

    def nu(self, subdomain: int, j: int):
        return self.nu1[j] if subdomain == 1 else self.nu2[j]

    def nu_fields(self, subdomain: int) -> list:
        return self.nu1 if subdomain == 1 else self.nu2

    def forcing(self, subdomain: int, j: int):
        f = self.f1[j] if subdomain == 1 else self.f2[j]
        return f


def draw_samples(spec: SampleSpec, J: int, seed: int) -> SampleSet:
    """Draw a deterministic sample set from the given spec.

    The kappa values are drawn first, then the diffusion parameters, so
    the realization is reproducible from (spec, J, seed) alone.
    """
    if J < 1:
        raise ValueError(f"sample count must be >= 1, got {J}")
    rng = np.random.default_rng(seed)
    kappas = spec.kappa.draw(rng, J)

    if spec.nu_kind == "constant":
        nu_fields = [Constant(spec.nu_base) for _ in range(J)]
    elif spec.nu_kind == "sinusoidal":
        if spec.nu_amplitude is None:
            raise ValueError("sinusoidal diffusion needs an amplitude distribution")
        amps = spec.nu_amplitude.draw(rng, J)
        nu_fields = [SinusoidalInTime(spec.nu_base, float(a)) for a in amps]
    else:
        raise ValueError(f"unknown diffusion family {spec.nu_kind!r}")

    if spec.tensor:
        kap = np.repeat(kappas, J)
        nus = [nu_fields[m] for _ in range(J) for m in range(J)]
        total = J * J
    else:
        kap = kappas
        nus = nu_fields
        total = J

    return SampleSet(
        J=total, kappa=kap, nu1=list(nus), nu2=list(nus),
        seed=seed, horizon=spec.horizon, spec=spec,
    )


def case1_samples(kappas, nu_const: float = 1.0, horizon: float = 1.0) -> SampleSet:
    """Explicit kappa list with one deterministic constant diffusion."""
    kappas = np.asarray(kappas, dtype=np.float64)
    shared = Constant(nu_const)
    return SampleSet(
        J=len(kappas), kappa=kappas,
        nu1=[shared] * len(kappas), nu2=[shared] * len(kappas),
        horizon=horizon,
    )


def case2_samples(kappas, epsilons, horizon: float = 1.0) -> SampleSet:
    """Tensor set: explicit kappas x sinusoidal diffusions 1 + (1+eps) sin t.

    Samples are ordered kappa-major: (k1,e1), (k1,e2), ..., (k3,e3).
    """
    kappas = np.asarray(kappas, dtype=np.float64)
    eps = np.asarray(epsilons, dtype=np.float64)
    fields = [SinusoidalInTime(1.0, 1.0 + float(e)) for e in eps]
    kap = np.repeat(kappas, len(eps))
    nus = [fields[m] for _ in range(len(kappas)) for m in range(len(eps))]
    return SampleSet(J=len(kap), kappa=kap, nu1=list(nus), nu2=list(nus), horizon=horizon)


def kappa_max(samples: SampleSet) -> float:
    """Largest friction parameter across the ensemble."""
    return samples.kappa_max


def nu_bar(samples: SampleSet, subdomain: int, x, t):
    """Ensemble mean of the diffusion coefficient at (x, t).

    Summation runs in fixed sample order for reproducibility.
    """
    fields = samples.nu_fields(subdomain)
    x = np.asarray(x, dtype=np.float64)
    acc = fields[0](x, None, t)
    for f in fields[1:]:
        acc = acc + f(x, None, t)
    return acc / samples.J


def nu_bar_field(samples: SampleSet, subdomain: int):
    """The ensemble-mean coefficient as a field callable (x, y, t)."""
    fields = samples.nu_fields(subdomain)
    J = samples.J

    def mean_field(x, y, t):
        acc = fields[0](x, y, t)
        for f in fields[1:]:
            acc = acc + f(x, y, t)
        return acc / J

    return mean_field


def nu_bar_time_avg(samples: SampleSet, subdomain: int, x, time_grid):
    """Mean of nu_bar over the grid points t^1 .. t^N (t^0 excluded)."""
    tg = np.asarray(time_grid, dtype=np.float64)
    if len(tg) < 2:
        raise ValueError("time grid needs at least t^0 and t^1")
    steps = tg[1:]
    acc = nu_bar(samples, subdomain, x, steps[0])
    for t in steps[1:]:
        acc = acc + nu_bar(samples, subdomain, x, t)
    return acc / len(steps)


def nu_bar_time_avg_field(samples: SampleSet, subdomain: int, time_grid):
    """Time-averaged ensemble-mean coefficient as a field callable.

    The averaged value is spatially constant for the supported families,
    but the callable keeps the (x, y, t) signature of every other field.
    """
    value = nu_bar_time_avg(samples, subdomain, np.array(0.0), time_grid)

    def avg_field(x, y, t):
        return value + 0.0 * np.asarray(x, dtype=np.float64)

    return avg_field


@dataclass(frozen=True)
class ThetaBounds:
    """Grid estimates of the ensemble-mean floor and deviation range."""

    theta: float        # min over the grid of the ensemble mean
    theta_minus: float  # smallest per-sample sup deviation from the mean
    theta_plus: float   # largest per-sample sup deviation from the mean
    premise: bool       # theta > theta_plus


def estimate_theta_bounds(samples: SampleSet, horizon: float | None = None,
                          grid: int = 64) -> ThetaBounds:
    """Estimate (theta, theta_minus, theta_plus) on a space-time grid.

    Advisory diagnostics: steppers log the premise flag but never gate on
    it.  The grid spans the closed domain and [0, horizon].
    """
    T = samples.horizon if horizon is None else horizon
    ts = np.linspace(0.0, T, grid)
    all_const = all(
        getattr(f, "spatially_constant", False)
        for f in samples.nu1 + samples.nu2
    )
    # Spatially constant families take the same value at every grid node,
    # so a single spatial point gives the identical estimate.
    nx = 1 if all_const else grid
    xs = np.linspace(0.0, 1.0, nx)
    ys = np.linspace(-1.0, 1.0, nx)
    X, Y = np.meshgrid(xs, ys, indexing="ij")

    theta = np.inf
    # Per-sample sup deviation accumulates over the whole grid before the
    # min/max across samples is taken.
    sup_dev = np.zeros(samples.J)
    for sub in (1, 2):
        fields = samples.nu_fields(sub)
        for t in ts:
            vals = np.stack([f(X, Y, t) for f in fields])  # (J, gx, gy)
            mean = vals.sum(axis=0) / samples.J
            theta = min(theta, float(mean.min()))
            dev = np.abs(vals - mean[None]).reshape(samples.J, -1).max(axis=1)
            sup_dev = np.maximum(sup_dev, dev)
    theta_minus = float(sup_dev.min())
    theta_plus = float(sup_dev.max())
    return ThetaBounds(
        theta=float(theta),
        theta_minus=theta_minus,
        theta_plus=theta_plus,
        premise=bool(theta > theta_plus),
    )


def write_sample_manifest(samples: SampleSet, stream) -> None:
    """Text table of the realization (index, kappa, families, seed)."""
    stream.write(f"# samples J={samples.J} seed={samples.seed} horizon={samples.horizon!r}\n")
    stream.write("# j kappa nu1 nu2\n")
    for j in range(samples.J):
        stream.write(
            f"{j} {samples.kappa[j]!r} {samples.nu1[j].describe()} "
            f"{samples.nu2[j].describe()}\n"
        )
