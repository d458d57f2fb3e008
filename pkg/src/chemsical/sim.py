"""ODE integration and exact stochastic simulation of a :class:`CrnModel`.

Both solvers run as numba kernels over the flat arrays produced by
:func:`chemsical.crn.compile_model`.  The SSA is Gillespie's direct method
with a reaction dependency graph; the ODE solver is an embedded
Dormand-Prince 5(4) scheme with step control.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .crn import K_BI, K_DIMER, K_HILL, K_UNI, CompiledModel, CrnModel
from .exceptions import ModelError, SolverError

DEFAULT_RTOL = 1e-6
DEFAULT_ATOL = 1e-8
MAX_EVENTS = 200_000_000

_OK, _EVENT_LIMIT, _STEP_UNDERFLOW, _STEP_LIMIT = 0, 1, 2, 3


# ---------------------------------------------------------------------------
# kernels


# Propensities are written out inline in each kernel: numba function calls
# carrying several arrays cost far more than the arithmetic itself.


@njit(cache=True, nogil=True)
def _ssa_kernel(x0, grid, rng, max_events, ipar, fpar, delta_ptr, delta_sp, delta_val, dep_ptr, dep_rx):
    nr = ipar.shape[0]
    ns = x0.shape[0]
    ng = grid.shape[0]
    out = np.empty((ng, ns), dtype=np.int64)
    x = x0.copy()
    a = np.zeros(nr)
    a0 = 0.0
    t = 0.0
    k = 0
    events = 0
    horizon = grid[ng - 1]
    status = _OK
    chosen = nr  # row nr of the dependency table lists every reaction
    while True:
        for q in range(dep_ptr[chosen], dep_ptr[chosen + 1]):
            j = dep_rx[q]
            kind = ipar[j, 0]
            if kind == K_BI:
                new = fpar[j, 0] * x[ipar[j, 1]] * x[ipar[j, 2]]
            elif kind == K_UNI:
                new = fpar[j, 0] * x[ipar[j, 1]]
            elif kind == K_DIMER:
                n = x[ipar[j, 1]]
                new = fpar[j, 0] * n * (n - 1.0) * 0.5
            elif kind == K_HILL:
                new = fpar[j, 0] / (1.0 + x[ipar[j, 3]] ** fpar[j, 1])
            else:
                new = fpar[j, 0]
            g = ipar[j, 4]
            if g >= 0:
                c = x[g]
                if fpar[j, 3] != 1.0:
                    c = c ** fpar[j, 3]
                new = new * c / (c + fpar[j, 2]) if c > 0.0 else 0.0
            a0 += new - a[j]
            a[j] = new
        if chosen == nr:
            a0 = 0.0
            for j in range(nr):
                a0 += a[j]
        if k >= ng or a0 <= 1e-300:
            break
        t_next = t + rng.standard_exponential() / a0
        while k < ng and grid[k] < t_next:
            for s in range(ns):
                out[k, s] = int(x[s])
            k += 1
        if t_next > horizon:
            break
        r = rng.random() * a0
        acc = 0.0
        chosen = nr
        for j in range(nr):
            acc += a[j]
            if r < acc and a[j] > 0.0:
                chosen = j
                break
        if chosen == nr:
            # the running total drifted above the true sum; recompute and redraw
            continue
        t = t_next
        for q in range(delta_ptr[chosen], delta_ptr[chosen + 1]):
            x[delta_sp[q]] += delta_val[q]
        events += 1
        if events % 4096 == 0:
            chosen = nr
        if events >= max_events:
            status = _EVENT_LIMIT
            break
    while k < ng:
        for s in range(ns):
            out[k, s] = int(x[s])
        k += 1
    return out, events, status, t


@njit(cache=True, nogil=True)
def _rhs(x, dx, ipar, fpar, delta_ptr, delta_sp, delta_val):
    for s in range(dx.shape[0]):
        dx[s] = 0.0
    for j in range(ipar.shape[0]):
        kind = ipar[j, 0]
        if kind == K_BI:
            a = fpar[j, 0] * x[ipar[j, 1]] * x[ipar[j, 2]]
        elif kind == K_UNI:
            a = fpar[j, 0] * x[ipar[j, 1]]
        elif kind == K_DIMER:
            n = x[ipar[j, 1]]
            a = fpar[j, 0] * n * n * 0.5
        elif kind == K_HILL:
            p = max(x[ipar[j, 3]], 0.0)
            a = fpar[j, 0] / (1.0 + p ** fpar[j, 1])
        else:
            a = fpar[j, 0]
        g = ipar[j, 4]
        if g >= 0:
            c = x[g]
            if c <= 0.0:
                a = 0.0
            else:
                if fpar[j, 3] != 1.0:
                    c = c ** fpar[j, 3]
                a = a * c / (c + fpar[j, 2])
        if a != 0.0:
            for q in range(delta_ptr[j], delta_ptr[j + 1]):
                dx[delta_sp[q]] += delta_val[q] * a


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1 / 5, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3 / 40, 9 / 40, 0.0, 0.0, 0.0, 0.0],
    [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0, 0.0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0, 0.0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0.0],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
])
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


@njit(cache=True, nogil=True)
def _ode_kernel(x0, grid, rtol, atol, max_steps, A, E, ipar, fpar, delta_ptr, delta_sp, delta_val):
    ns = x0.shape[0]
    ng = grid.shape[0]
    out = np.empty((ng, ns))
    x = x0.copy()
    K = np.zeros((7, ns))
    xs = np.empty(ns)
    x_new = np.empty(ns)
    t = 0.0
    k = 0
    while k < ng and grid[k] <= 0.0:
        out[k] = x
        k += 1
    horizon = grid[ng - 1]
    _rhs(x, K[0], ipar, fpar, delta_ptr, delta_sp, delta_val)
    # initial step guess
    d0 = 0.0
    d1 = 0.0
    for s in range(ns):
        sc = atol + rtol * abs(x[s])
        d0 += (x[s] / sc) ** 2
        d1 += (K[0, s] / sc) ** 2
    d0 = math.sqrt(d0 / max(ns, 1))
    d1 = math.sqrt(d1 / max(ns, 1))
    h = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h = min(h, max(horizon, 1e-12))
    steps = 0
    clips = 0
    status = _OK
    while k < ng:
        target = grid[k]
        hit = False
        if t + h >= target:
            h = target - t
            hit = True
        if h <= 1e-14 * max(1.0, abs(t)):
            if hit:
                out[k] = x
                k += 1
                continue
            status = _STEP_UNDERFLOW
            break
        for st in range(1, 7):
            for s in range(ns):
                acc = x[s]
                for q in range(st):
                    acc += h * A[st, q] * K[q, s]
                xs[s] = acc
            _rhs(xs, K[st], ipar, fpar, delta_ptr, delta_sp, delta_val)
        # xs holds the 5th-order solution (FSAL row)
        err = 0.0
        for s in range(ns):
            x_new[s] = xs[s]
            e = 0.0
            for q in range(7):
                e += E[q] * K[q, s]
            sc = atol + rtol * max(abs(x[s]), abs(x_new[s]))
            err += (h * e / sc) ** 2
        err = math.sqrt(err / max(ns, 1))
        steps += 1
        if steps > max_steps:
            status = _STEP_LIMIT
            break
        if err <= 1.0:
            t = target if hit else t + h
            clipped = False
            for s in range(ns):
                if x_new[s] < 0.0:
                    x_new[s] = 0.0
                    clipped = True
                x[s] = x_new[s]
            if clipped:
                clips += 1
                _rhs(x, K[0], ipar, fpar, delta_ptr, delta_sp, delta_val)
            else:
                for s in range(ns):
                    K[0, s] = K[6, s]
            if hit:
                out[k] = x
                k += 1
            fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            h = h * fac
        else:
            h = h * max(0.2, 0.9 * err ** -0.2)
    return out, steps, clips, status, t


# ---------------------------------------------------------------------------
# public API


@dataclass
class Trajectory:
    times: np.ndarray
    counts: np.ndarray  # (len(times), n_species)
    species: tuple
    solver: str
    seed: int | None = None
    diagnostics: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.counts[:, self.species.index(name)]
        except ValueError:
            raise ModelError(f"unknown species {name!r}") from None

    def state_at(self, index: int = -1) -> dict:
        row = self.counts[index]
        return {s: row[i].item() for i, s in enumerate(self.species)}

    def final_state(self) -> dict:
        return self.state_at(-1)

    def to_csv(self, path=None, species=None) -> str:
        names = list(species) if species is not None else list(self.species)
        cols = [self.species.index(n) for n in names]
        buf = io.StringIO()
        buf.write(f"# solver={self.solver} seed={self.seed}\n")
        buf.write(",".join(["time"] + names) + "\n")
        fmt = "{:d}" if self.counts.dtype.kind == "i" else "{!r}"
        for t, row in zip(self.times, self.counts[:, cols]):
            buf.write(repr(float(t)) + "," + ",".join(fmt.format(v.item()) for v in row) + "\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def save_npz(self, path):
        np.savez_compressed(
            path, times=self.times, counts=self.counts, species=np.array(self.species),
            solver=np.array(self.solver), seed=np.array(-1 if self.seed is None else self.seed, dtype=np.int64),
        )

    @classmethod
    def load_npz(cls, path) -> "Trajectory":
        with np.load(path) as f:
            seed = int(f["seed"])
            return cls(f["times"], f["counts"], tuple(str(s) for s in f["species"]), str(f["solver"]),
                       None if seed < 0 else seed)


def _prepare_grid(horizon, grid):
    if horizon is None or horizon <= 0:
        raise ValueError("horizon must be positive")
    if grid is None:
        grid = np.array([horizon], dtype=np.float64)
    grid = np.ascontiguousarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a non-empty 1-D array")
    if np.any(np.diff(grid) <= 0) or grid[0] < 0 or grid[-1] > horizon * (1 + 1e-12):
        raise ValueError("grid must be strictly ascending within [0, horizon]")
    if grid[-1] < horizon:
        grid = np.append(grid, float(horizon))
    return grid


def _compiled(model):
    return model.compiled if isinstance(model, CrnModel) else model


def _initial(comp: CompiledModel, state0):
    if state0 is None:
        return comp.x0.copy()
    if isinstance(state0, dict):
        x = comp.x0.copy()
        for name, v in state0.items():
            try:
                x[comp.names.index(name)] = v
            except ValueError:
                raise ModelError(f"unknown species {name!r}") from None
        return x
    x = np.asarray(state0, dtype=np.float64).copy()
    if x.shape != comp.x0.shape:
        raise ModelError("state vector does not match the model's species list")
    return x


def simulate_ode(model, horizon, grid=None, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, state0=None,
                 max_steps=10_000_000, method="dopri") -> Trajectory:
    """Integrate the mass-action ODEs and sample them on ``grid``.

    ``state0`` overrides the model's initial counts (mapping or full vector).
    ``method='lsoda'`` hands stiff systems to scipy's LSODA.
    """
    comp = _compiled(model)
    grid = _prepare_grid(horizon, grid)
    x0 = _initial(comp, state0)
    if np.any(x0 < 0):
        raise ModelError("initial state has negative entries")
    if method == "lsoda":
        return _simulate_lsoda(comp, grid, x0, rtol, atol)
    if method != "dopri":
        raise ValueError(f"unknown ODE method {method!r}")
    out, steps, clips, status, t = _ode_kernel(
        x0, grid, float(rtol), float(atol), int(max_steps), _A, _E,
        comp.ipar, comp.fpar, comp.delta_ptr, comp.delta_sp, comp.delta_val,
    )
    if status != _OK:
        reason = "step size underflow" if status == _STEP_UNDERFLOW else "step limit exceeded"
        raise SolverError(f"ODE integration failed at t={t:.6g}: {reason}", time=float(t))
    return Trajectory(grid, out, comp.names, "ode", None, {"steps": int(steps), "clipped_steps": int(clips)})


def _simulate_lsoda(comp, grid, x0, rtol, atol):
    from scipy.integrate import solve_ivp

    args = (comp.ipar, comp.fpar, comp.delta_ptr, comp.delta_sp, comp.delta_val)

    def rhs(_t, x):
        dx = np.empty_like(x)
        _rhs(x, dx, *args)
        return dx

    sol = solve_ivp(rhs, (0.0, float(grid[-1])), x0, method="LSODA", t_eval=grid, rtol=rtol, atol=atol)
    if not sol.success:
        raise SolverError(f"LSODA failed: {sol.message}", time=float(np.ravel(sol.t)[-1]) if len(sol.t) else 0.0)
    return Trajectory(grid, np.maximum(sol.y.T, 0.0), comp.names, "ode-lsoda", None, {"steps": int(sol.nfev)})


def child_seed(master_seed: int, *key: int) -> int:
    """Derive a 32-bit seed from ``master_seed`` and an integer path ``key``.

    Uses numpy's ``SeedSequence`` spawn keys, so the value depends only on
    (master, key) and never on evaluation order.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint32)[0])


def _run_kernel(comp, x0s, grid, seeds, max_events):
    out = np.empty((len(seeds), grid.size, comp.x0.size), np.int64)
    events = np.empty(len(seeds), np.int64)
    args = comp.kernel_args()
    for i, seed in enumerate(seeds):
        rng = np.random.default_rng(int(seed))
        out[i], events[i], status, t = _ssa_kernel(x0s[i], grid, rng, int(max_events), *args)
        if status != _OK:
            raise SolverError(f"SSA exceeded {max_events} events at t={t:.6g}", time=float(t))
    return out, events


def ssa_arrays(model, horizon, seeds, grid=None, state0=None, workers=1, max_events=MAX_EVENTS):
    """Run one SSA trajectory per seed and return ``(grid, counts, events)``.

    ``counts`` has shape ``(len(seeds), len(grid), n_species)``.  ``state0``
    may be a single state or one row per seed.
    """
    comp = _compiled(model)
    grid = _prepare_grid(horizon, grid)
    seeds = np.ascontiguousarray(seeds, dtype=np.int64)
    if state0 is not None and not isinstance(state0, dict) and np.ndim(state0) == 2:
        x0s = np.ascontiguousarray(state0, dtype=np.float64)
        if x0s.shape != (seeds.size, comp.x0.size):
            raise ModelError("per-trajectory initial states have the wrong shape")
    else:
        x0s = np.tile(_initial(comp, state0), (seeds.size, 1))
    if np.any(x0s < 0) or np.any(x0s != np.round(x0s)):
        raise ModelError("SSA initial counts must be non-negative integers")
    if seeds.size == 0:
        return grid, np.zeros((0, grid.size, comp.x0.size), np.int64), np.zeros(0, np.int64)
    workers = max(1, int(workers))
    if workers == 1 or seeds.size < 2 * workers:
        out, events = _run_kernel(comp, x0s, grid, seeds, max_events)
        return grid, out, events
    chunks = np.array_split(np.arange(seeds.size), workers)
    with ThreadPoolExecutor(workers) as pool:
        parts = list(pool.map(lambda idx: _run_kernel(comp, x0s[idx], grid, seeds[idx], max_events), chunks))
    return grid, np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def simulate_ssa(model, horizon, grid=None, seed=0, state0=None, max_events=MAX_EVENTS) -> Trajectory:
    """Gillespie direct-method sample path reported on ``grid``.

    Each grid value holds the last state at or before that time.  A run whose
    total propensity reaches zero freezes in place.
    """
    comp = _compiled(model)
    grid, out, events = ssa_arrays(comp, horizon, [int(seed)], grid, state0, 1, max_events)
    return Trajectory(grid, out[0], comp.names, "ssa", int(seed), {"events": int(events[0])})


def run_batch(model, horizon, grid=None, n_traj=1, master_seed=0, workers=1, state0=None, start=0):
    """``n_traj`` independent SSA trajectories; trajectory ``i`` uses ``child_seed(master_seed, i)``."""
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    comp = _compiled(model)
    seeds = [child_seed(master_seed, i) for i in range(start, start + n_traj)]
    grid, out, events = ssa_arrays(comp, horizon, seeds, grid, state0, workers)
    return [
        Trajectory(grid, out[i], comp.names, "ssa", seeds[i], {"events": int(events[i])})
        for i in range(n_traj)
    ]
