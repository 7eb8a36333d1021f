"""Seeded simulation of the driving processes H and Z on a partition.

Both drivers are drift + Brownian + compound-Poisson processes; H carries an
initial point, Z starts at zero.  Jump times are sampled independently of the
partition and inserted into the computational grid, so schemes see every jump
at an exact grid point and left limits are well defined.

Randomness is counter-based (Philox): every draw comes from a substream keyed
by (master seed, trajectory index, purpose tag, context word), so trajectory
generation is order-independent and reproducible bit-for-bit.  Brownian
values are built by a dyadic bridge descent whose innovations are keyed by
the midpoint time, which makes W(t) a pure function of (seed, trajectory, t):
simulating on a refined partition reproduces the coarse values exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .paths import Partition, StepPath

__all__ = [
    "JumpLaw",
    "ProcessSpec",
    "DriverSpec",
    "DriverRealization",
    "simulate",
    "refine_consistent",
    "from_step_paths",
    "write_realization_csv",
    "write_realization_jsonl",
]

_U64 = 0xFFFFFFFFFFFFFFFF

# purpose tags for substreams
_TAG_Z_TIMES = 1
_TAG_Z_SIZES = 2
_TAG_Z_BM = 3
_TAG_H_TIMES = 4
_TAG_H_SIZES = 5
_TAG_H_BM = 6


def _substream(seed: int, index: int, purpose: int, context: int = 0) -> np.random.Generator:
    key = np.array([seed & _U64, index & _U64], dtype=np.uint64)
    counter = np.array([0, purpose & _U64, context & _U64, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def _time_bits(t: float) -> int:
    return int(np.float64(t).view(np.uint64))


@dataclass(frozen=True, eq=False)
class JumpLaw:
    """Jump size distribution: gaussian(mean, cov), uniform_ball(r), or fixed(v)."""

    kind: str
    mean: np.ndarray | None = None
    factor: np.ndarray | None = None  # cov = factor @ factor.T
    radius: float = 0.0
    value: np.ndarray | None = None

    @staticmethod
    def gaussian(mean, cov) -> "JumpLaw":
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise ValueError("covariance shape does not match the mean")
        # symmetric psd factor; tolerate singular covariances
        eigval, eigvec = np.linalg.eigh(0.5 * (cov + cov.T))
        if eigval.min() < -1e-12:
            raise ValueError("covariance must be positive semidefinite")
        factor = eigvec @ np.diag(np.sqrt(np.clip(eigval, 0.0, None)))
        return JumpLaw(kind="gaussian", mean=mean, factor=factor)

    @staticmethod
    def uniform_ball(radius: float, dimension: int) -> "JumpLaw":
        if not (radius > 0):
            raise ValueError("radius must be positive")
        return JumpLaw(kind="uniform_ball", radius=float(radius),
                       value=np.zeros(dimension))

    @staticmethod
    def fixed(value) -> "JumpLaw":
        return JumpLaw(kind="fixed", value=np.atleast_1d(np.asarray(value, dtype=float)))

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "gaussian":
            return self.mean + self.factor @ rng.standard_normal(self.mean.size)
        if self.kind == "uniform_ball":
            d = self.value.size
            direction = rng.standard_normal(d)
            nrm = float(np.linalg.norm(direction))
            if nrm == 0.0:
                return np.zeros(d)
            u = rng.uniform()
            return direction * (self.radius * u ** (1.0 / d) / nrm)
        if self.kind == "fixed":
            return self.value.copy()
        raise ValueError(f"unknown jump law {self.kind!r}")

    @property
    def spec(self) -> dict:
        if self.kind == "gaussian":
            cov = self.factor @ self.factor.T
            return {"kind": "gaussian", "mean": self.mean.tolist(), "cov": cov.tolist()}
        if self.kind == "uniform_ball":
            return {"kind": "uniform_ball", "radius": self.radius,
                    "dimension": self.value.size}
        return {"kind": "fixed", "value": self.value.tolist()}


@dataclass(frozen=True, eq=False)
class ProcessSpec:
    """Drift + Brownian + compound-Poisson description of one process."""

    dimension: int
    brownian_vol: np.ndarray
    drift: np.ndarray
    jump_rate: float = 0.0
    jump_law: JumpLaw | None = None

    def __post_init__(self):
        d = self.dimension
        vol = np.atleast_2d(np.asarray(self.brownian_vol, dtype=float))
        drift = np.atleast_1d(np.asarray(self.drift, dtype=float))
        if vol.shape != (d, d):
            raise ValueError(f"brownian_vol must be {d}x{d}")
        if drift.shape != (d,):
            raise ValueError(f"drift must have length {d}")
        if not (np.all(np.isfinite(vol)) and np.all(np.isfinite(drift))):
            raise ValueError("drift and volatility must be finite")
        if self.jump_rate < 0:
            raise ValueError("jump rate must be nonnegative")
        if self.jump_rate > 0 and self.jump_law is None:
            raise ValueError("a jump law is required when the jump rate is positive")
        object.__setattr__(self, "brownian_vol", vol)
        object.__setattr__(self, "drift", drift)

    @property
    def has_brownian(self) -> bool:
        return bool(np.any(self.brownian_vol != 0.0))

    @staticmethod
    def zero(dimension: int) -> "ProcessSpec":
        return ProcessSpec(dimension, np.zeros((dimension, dimension)),
                           np.zeros(dimension))


@dataclass(frozen=True, eq=False)
class DriverSpec:
    """Specification of the pair (H, Z); Z_0 = 0, H starts at ``h0``."""

    z: ProcessSpec
    h: ProcessSpec
    h0: np.ndarray

    def __post_init__(self):
        if self.z.dimension != self.h.dimension:
            raise ValueError("H and Z must share one dimension")
        h0 = np.atleast_1d(np.asarray(self.h0, dtype=float))
        if h0.shape != (self.z.dimension,) or not np.all(np.isfinite(h0)):
            raise ValueError("h0 must be a finite point of the driver dimension")
        object.__setattr__(self, "h0", h0)

    @property
    def dimension(self) -> int:
        return self.z.dimension


class _BrownianPath:
    """Standard d-dimensional Brownian motion on [0, T] as a pure function.

    Values are produced by dyadic bridge descent from the pair (0, T); the
    innovation at each node is keyed by the bit pattern of its midpoint, so
    a value at time t never depends on which other times were queried.
    """

    def __init__(self, seed: int, index: int, purpose: int, horizon: float, dim: int):
        self._seed = seed
        self._index = index
        self._purpose = purpose
        self._horizon = float(horizon)
        self._dim = dim
        self._cache: dict[float, np.ndarray] = {0.0: np.zeros(dim)}
        self._cache[self._horizon] = np.sqrt(self._horizon) * self._gauss(self._horizon)

    def _gauss(self, t: float) -> np.ndarray:
        rng = _substream(self._seed, self._index, self._purpose, _time_bits(t))
        return rng.standard_normal(self._dim)

    def _bridge(self, a: float, b: float, va: np.ndarray, vb: np.ndarray, s: float) -> np.ndarray:
        frac = (s - a) / (b - a)
        std = np.sqrt((s - a) * (b - s) / (b - a))
        return va + frac * (vb - va) + std * self._gauss(s)

    def value(self, t: float) -> np.ndarray:
        t = float(t)
        if not (0.0 <= t <= self._horizon):
            raise ValueError(f"time {t} outside [0, {self._horizon}]")
        cached = self._cache.get(t)
        if cached is not None:
            return cached
        a, b = 0.0, self._horizon
        va, vb = self._cache[a], self._cache[b]
        while True:
            m = 0.5 * (a + b)
            if not (a < m < b):
                # interval collapsed to adjacent floats: bridge straight to t
                vt = self._bridge(a, b, va, vb, t)
                self._cache[t] = vt
                return vt
            vm = self._cache.get(m)
            if vm is None:
                vm = self._bridge(a, b, va, vb, m)
                self._cache[m] = vm
            if t == m:
                return vm
            if t < m:
                b, vb = m, vm
            else:
                a, va = m, vm


@dataclass(frozen=True, eq=False)
class DriverRealization:
    """One sampled (H, Z) pair aligned to an augmented partition.

    ``grid`` is the base partition with all sampled jump times inserted;
    ``jump_h``/``jump_z`` hold the process discontinuity at each grid time
    (zero rows where the process does not jump) and ``jump_flags`` marks the
    arrival times of either process.
    """

    base: Partition
    grid: Partition
    h: StepPath
    z: StepPath
    jump_flags: np.ndarray
    jump_h: np.ndarray
    jump_z: np.ndarray
    seed: int | None = None
    trajectory_index: int | None = None
    spec: DriverSpec | None = None

    @property
    def dimension(self) -> int:
        return self.z.dimension


def _sample_jumps(proc: ProcessSpec, seed: int, index: int, tag_times: int,
                  tag_sizes: int, horizon: float):
    if proc.jump_rate == 0.0:
        return np.empty(0), np.empty((0, proc.dimension))
    rng_t = _substream(seed, index, tag_times)
    count = int(rng_t.poisson(proc.jump_rate * horizon))
    times = np.sort(rng_t.uniform(0.0, horizon, size=count))
    rng_s = _substream(seed, index, tag_sizes)
    sizes = np.asarray([proc.jump_law.sample(rng_s) for _ in range(count)])
    if count == 0:
        sizes = np.empty((0, proc.dimension))
    return times, sizes


def _process_values(proc: ProcessSpec, times: np.ndarray, bm: _BrownianPath | None,
                    jump_times: np.ndarray, jump_sizes: np.ndarray) -> np.ndarray:
    vals = times[:, None] * proc.drift[None, :]
    if bm is not None:
        w = np.asarray([bm.value(t) for t in times])
        vals = vals + w @ proc.brownian_vol.T
    if jump_times.size:
        cum = np.vstack([np.zeros(proc.dimension), np.cumsum(jump_sizes, axis=0)])
        idx = np.searchsorted(jump_times, times, side="right")
        vals = vals + cum[idx]
    return vals


def _jump_arrays(times: np.ndarray, jump_times: np.ndarray, jump_sizes: np.ndarray,
                 dim: int) -> np.ndarray:
    out = np.zeros((times.size, dim))
    if jump_times.size:
        pos = np.searchsorted(times, jump_times)
        out[pos] = jump_sizes
    return out


def simulate(spec: DriverSpec, partition: Partition, seed: int,
             trajectory_index: int = 0) -> DriverRealization:
    """Sample one (H, Z) realization, deterministic in (seed, trajectory_index).

    Jump times of both processes are merged into the grid.  Simulating the
    same trajectory on a refined partition reproduces the values at all
    common grid points bit-for-bit.
    """
    horizon = partition.horizon
    d = spec.dimension
    zt, zs = _sample_jumps(spec.z, seed, trajectory_index, _TAG_Z_TIMES, _TAG_Z_SIZES, horizon)
    ht, hs = _sample_jumps(spec.h, seed, trajectory_index, _TAG_H_TIMES, _TAG_H_SIZES, horizon)
    times = partition.times
    if zt.size or ht.size:
        times = np.union1d(times, np.union1d(zt, ht))
    grid = Partition(times)

    bm_z = _BrownianPath(seed, trajectory_index, _TAG_Z_BM, horizon, d) if spec.z.has_brownian else None
    bm_h = _BrownianPath(seed, trajectory_index, _TAG_H_BM, horizon, d) if spec.h.has_brownian else None

    z_vals = _process_values(spec.z, times, bm_z, zt, zs)
    h_vals = spec.h0[None, :] + _process_values(spec.h, times, bm_h, ht, hs)

    jump_z = _jump_arrays(times, zt, zs, d)
    jump_h = _jump_arrays(times, ht, hs, d)
    flags = np.isin(times, zt) | np.isin(times, ht)

    return DriverRealization(
        base=partition,
        grid=grid,
        h=StepPath(grid, h_vals),
        z=StepPath(grid, z_vals),
        jump_flags=flags,
        jump_h=jump_h,
        jump_z=jump_z,
        seed=seed,
        trajectory_index=trajectory_index,
        spec=spec,
    )


def refine_consistent(realization: DriverRealization, finer: Partition) -> DriverRealization:
    """Re-realize the same trajectory on a finer partition.

    Coarse grid points and jump times keep their values bit-exactly; interior
    Brownian values come from the keyed bridge construction.  ``finer`` must
    contain every base partition point.
    """
    if not finer.contains_times(realization.base):
        raise ValueError("finer partition must contain all coarse grid points")
    if realization.spec is not None:
        return simulate(realization.spec, finer, realization.seed,
                        realization.trajectory_index)
    # path-backed realization: re-grid by right-continuous evaluation
    if not finer.contains_times(realization.grid):
        raise ValueError("finer partition must contain all jump times of the paths")
    times = finer.times
    h = StepPath(finer, realization.h.values_at(times))
    z = StepPath(finer, realization.z.values_at(times))
    pos = np.searchsorted(times, realization.grid.times)
    jump_h = np.zeros((times.size, realization.dimension))
    jump_z = np.zeros_like(jump_h)
    jump_h[pos] = realization.jump_h
    jump_z[pos] = realization.jump_z
    flags = np.zeros(times.size, dtype=bool)
    flags[pos] = realization.jump_flags
    return DriverRealization(
        base=finer, grid=finer, h=h, z=z, jump_flags=flags,
        jump_h=jump_h, jump_z=jump_z,
        seed=realization.seed, trajectory_index=realization.trajectory_index,
        spec=None,
    )


def from_step_paths(h: StepPath, z: StepPath) -> DriverRealization:
    """Wrap user-supplied step paths as a driver realization.

    Every nonzero grid increment of either path is treated as a jump of that
    process (a step path genuinely jumps at its grid points).  Z must start
    at zero.
    """
    if not h.partition.same_times(z.partition):
        raise ValueError("H and Z must share one partition")
    if np.any(z.values[0] != 0.0):
        raise ValueError("Z must start at zero")
    jump_h = h.jumps()
    jump_z = z.jumps()
    flags = (np.linalg.norm(jump_h, axis=1) > 0) | (np.linalg.norm(jump_z, axis=1) > 0)
    return DriverRealization(
        base=h.partition, grid=h.partition, h=h, z=z,
        jump_flags=flags, jump_h=jump_h, jump_z=jump_z,
        seed=None, trajectory_index=None, spec=None,
    )


def write_realization_csv(realization: DriverRealization, fh):
    d = realization.dimension
    cols = (["time"] + [f"h_{i + 1}" for i in range(d)]
            + [f"z_{i + 1}" for i in range(d)] + ["jump"])
    fh.write(",".join(cols) + "\n")
    for t, hrow, zrow, flag in zip(realization.grid.times, realization.h.values,
                                   realization.z.values, realization.jump_flags):
        fields = [repr(float(t))] + [repr(float(v)) for v in hrow] \
            + [repr(float(v)) for v in zrow] + [str(int(flag))]
        fh.write(",".join(fields) + "\n")


def write_realization_jsonl(realization: DriverRealization, fh):
    import json

    for t, hrow, zrow, flag in zip(realization.grid.times, realization.h.values,
                                   realization.z.values, realization.jump_flags):
        rec = {
            "time": float(t),
            "h": [float(v) for v in hrow],
            "z": [float(v) for v in zrow],
            "jump": bool(flag),
        }
        fh.write(json.dumps(rec, sort_keys=True) + "\n")
