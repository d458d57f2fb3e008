"""Chemical reaction network representation.

A :class:`CrnModel` is an immutable bundle of species, reactions and an
initial state.  The same model feeds the ODE integrator (counts read as
non-negative reals) and the Gillespie kernel (integer counts); both read
propensities from the arrays produced by :func:`compile_model`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np
import yaml

from .exceptions import InfeasibleFiringError, ModelError

ROLES = frozenset(
    {
        "input",
        "threshold",
        "base-threshold",
        "indicator",
        "detection",
        "spent-evidence",
        "blank",
        "oscillator",
        "reservoir",
        "waste",
        "trigger",
        "undo",
        "generic",
    }
)

MASS_ACTION = "mass-action"
HILL_PRODUCTION = "hill-production"

# kernel codes, see compile_model
K_ZERO, K_UNI, K_BI, K_DIMER, K_HILL = 0, 1, 2, 3, 4


@dataclass(frozen=True)
class Species:
    name: str
    role: str = "generic"

    def __post_init__(self):
        if self.role not in ROLES:
            raise ModelError(f"unknown species role {self.role!r} for {self.name!r}")


@dataclass(frozen=True)
class HillGate:
    """Multiplicative activation ``x**n / (x**n + half**n)`` on a gating species."""

    species: str
    half: float
    n: float = 1.0

    def factor(self, count):
        count = max(float(count), 0.0)
        if count == 0.0:
            return 0.0
        xn = count**self.n
        return xn / (xn + self.half**self.n)


@dataclass(frozen=True)
class RateLaw:
    kind: str = MASS_ACTION
    rate: float = 1.0
    repressor: str | None = None
    hill_n: float = 1.0

    @classmethod
    def mass_action(cls, rate):
        return cls(MASS_ACTION, float(rate))

    @classmethod
    def hill(cls, alpha, repressor, n):
        """Zeroth-order production at ``alpha / (1 + N(repressor)**n)``."""
        return cls(HILL_PRODUCTION, float(alpha), repressor, float(n))

    def scaled(self, factor):
        return RateLaw(self.kind, self.rate * factor, self.repressor, self.hill_n)


def _as_stoich(mapping) -> tuple[tuple[str, int], ...]:
    if mapping is None:
        return ()
    if isinstance(mapping, Mapping):
        items = mapping.items()
    else:
        counts: dict[str, int] = {}
        for name in mapping:
            counts[name] = counts.get(name, 0) + 1
        items = counts.items()
    return tuple(sorted((str(k), int(v)) for k, v in items if int(v) != 0))


@dataclass(frozen=True)
class Reaction:
    """Reactants and products are stored as sorted ``(species, stoichiometry)`` pairs.

    Either a mapping or an iterable of names (multiset) is accepted.
    """

    reactants: tuple = ()
    products: tuple = ()
    law: RateLaw = field(default_factory=RateLaw)
    gate: HillGate | None = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "reactants", _as_stoich(self.reactants))
        object.__setattr__(self, "products", _as_stoich(self.products))

    @property
    def reactant_map(self) -> dict[str, int]:
        return dict(self.reactants)

    @property
    def product_map(self) -> dict[str, int]:
        return dict(self.products)

    @property
    def order(self) -> int:
        return sum(v for _, v in self.reactants)

    def net_change(self) -> dict[str, int]:
        delta: dict[str, int] = {}
        for s, v in self.reactants:
            delta[s] = delta.get(s, 0) - v
        for s, v in self.products:
            delta[s] = delta.get(s, 0) + v
        return {s: v for s, v in delta.items() if v != 0}

    def referenced_species(self) -> set[str]:
        names = {s for s, _ in self.reactants} | {s for s, _ in self.products}
        if self.law.repressor is not None:
            names.add(self.law.repressor)
        if self.gate is not None:
            names.add(self.gate.species)
        return names

    def with_rate(self, rate):
        return Reaction(self.reactants, self.products, RateLaw(self.law.kind, rate, self.law.repressor, self.law.hill_n), self.gate, self.name)

    def with_gate(self, gate):
        return Reaction(self.reactants, self.products, self.law, gate, self.name)


def propensity(reaction: Reaction, state: Mapping[str, float]) -> float:
    """Instantaneous firing rate of ``reaction`` in ``state``.

    Mass action uses combinatorial counting (``k*N*(N-1)/2`` for ``A + A``),
    which reduces to ``k*x**2/2`` for the deterministic reading.
    """
    for name in reaction.referenced_species():
        if name not in state:
            raise ModelError(f"species {name!r} missing from state")
    law = reaction.law
    if law.kind == HILL_PRODUCTION:
        p = max(float(state[law.repressor]), 0.0)
        value = law.rate / (1.0 + p**law.hill_n)
    else:
        value = law.rate
        for name, nu in reaction.reactants:
            n = float(state[name])
            if n < 0:
                raise ModelError(f"negative count for {name!r}")
            if nu == 1:
                value *= n
            elif nu == 2:
                value *= n * (n - 1.0) / 2.0 if float(n).is_integer() else n * n / 2.0
            else:
                raise ModelError("mass-action reactions support order <= 2")
    if reaction.gate is not None:
        value *= reaction.gate.factor(state[reaction.gate.species])
    return max(value, 0.0)


def apply_reaction(reaction: Reaction, state: Mapping[str, int]) -> dict[str, int]:
    """Fire ``reaction`` once and return the new state (input left untouched)."""
    new = dict(state)
    for name, nu in reaction.reactants:
        if name not in new:
            raise ModelError(f"species {name!r} missing from state")
        if new[name] < nu:
            raise InfeasibleFiringError(f"{reaction.name or reaction}: needs {nu} x {name}, has {new[name]}")
    for name, delta in reaction.net_change().items():
        if name not in new:
            raise ModelError(f"species {name!r} missing from state")
        new[name] = new[name] + delta
    return new


def validate_model(model: "CrnModel") -> list[str]:
    """Return human-readable diagnostics; an empty list means well formed."""
    issues = []
    names = [s.name for s in model.species]
    declared = set(names)
    if len(declared) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        issues.append(f"duplicate species: {', '.join(dupes)}")
    for i, r in enumerate(model.reactions):
        label = r.name or f"reaction[{i}]"
        missing = sorted((({s for s, _ in r.reactants} | {s for s, _ in r.products}) - declared))
        if missing:
            issues.append(f"{label}: undeclared species {', '.join(missing)}")
        if r.law.rate < 0 or not np.isfinite(r.law.rate):
            issues.append(f"{label}: negative or non-finite rate {r.law.rate}")
        if r.law.kind == MASS_ACTION and r.order > 2:
            issues.append(f"{label}: mass-action order {r.order} > 2")
        if r.law.kind == HILL_PRODUCTION:
            if r.law.repressor not in declared:
                issues.append(f"{label}: repressor {r.law.repressor!r} not declared")
            if r.law.hill_n < 1:
                issues.append(f"{label}: Hill coefficient {r.law.hill_n} < 1")
            if r.reactants:
                issues.append(f"{label}: hill-production reactions take no reactants")
        if r.law.kind not in (MASS_ACTION, HILL_PRODUCTION):
            issues.append(f"{label}: unknown rate law {r.law.kind!r}")
        if r.gate is not None:
            if r.gate.species not in declared:
                issues.append(f"{label}: gate species {r.gate.species!r} not declared")
            if r.gate.half <= 0 or r.gate.n < 1:
                issues.append(f"{label}: invalid gate parameters")
    for name, count in model.initial.items():
        if name not in declared:
            issues.append(f"initial count for undeclared species {name!r}")
        elif count < 0 or int(count) != count:
            issues.append(f"initial count of {name!r} is not a non-negative integer: {count}")
    return issues


@dataclass(frozen=True)
class CompiledModel:
    """Flat arrays consumed by the numba kernels.

    ``ipar`` rows hold ``(kind, sp1, sp2, repressor, gate species)`` and
    ``fpar`` rows hold ``(rate, hill n, gate half**n, gate n)``.  The
    dependency CSR has one extra row (index ``n_reactions``) listing every
    reaction, used for full recomputation.
    """

    names: tuple
    x0: np.ndarray
    ipar: np.ndarray
    fpar: np.ndarray
    delta_ptr: np.ndarray
    delta_sp: np.ndarray
    delta_val: np.ndarray
    dep_ptr: np.ndarray
    dep_rx: np.ndarray
    stoich: np.ndarray  # (n_reactions, n_species) net change

    @property
    def n_reactions(self) -> int:
        return self.ipar.shape[0]

    @property
    def rate(self) -> np.ndarray:
        return self.fpar[:, 0]

    def kernel_args(self):
        return (self.ipar, self.fpar, self.delta_ptr, self.delta_sp, self.delta_val, self.dep_ptr, self.dep_rx)

    def with_rates(self, rate) -> "CompiledModel":
        fpar = self.fpar.copy()
        fpar[:, 0] = np.asarray(rate, dtype=np.float64)
        return CompiledModel(**{**self.__dict__, "fpar": fpar})


def compile_model(model: "CrnModel") -> CompiledModel:
    issues = validate_model(model)
    if issues:
        raise ModelError("; ".join(issues))
    names = tuple(s.name for s in model.species)
    idx = {n: i for i, n in enumerate(names)}
    nr, ns = len(model.reactions), len(names)
    ipar = np.full((nr, 5), -1, np.int64)
    fpar = np.ones((nr, 4))
    stoich = np.zeros((nr, ns), np.int64)
    readers: list[list[int]] = [[] for _ in range(ns)]
    for j, r in enumerate(model.reactions):
        fpar[j, 0] = r.law.rate
        if r.law.kind == HILL_PRODUCTION:
            ipar[j, 0] = K_HILL
            ipar[j, 3] = idx[r.law.repressor]
            fpar[j, 1] = r.law.hill_n
        elif not r.reactants:
            ipar[j, 0] = K_ZERO
        elif len(r.reactants) == 1:
            ipar[j, 0] = K_UNI if r.reactants[0][1] == 1 else K_DIMER
            ipar[j, 1] = idx[r.reactants[0][0]]
        else:
            ipar[j, 0] = K_BI
            ipar[j, 1] = idx[r.reactants[0][0]]
            ipar[j, 2] = idx[r.reactants[1][0]]
        if r.gate is not None:
            ipar[j, 4] = idx[r.gate.species]
            fpar[j, 2] = r.gate.half**r.gate.n
            fpar[j, 3] = r.gate.n
        for s in {int(v) for v in ipar[j, 1:] if v >= 0}:
            readers[s].append(j)
        for name, d in r.net_change().items():
            stoich[j, idx[name]] = d
    delta_ptr = np.zeros(nr + 1, np.int64)
    delta_sp, delta_val = [], []
    dep_ptr = np.zeros(nr + 2, np.int64)
    dep_rx: list[int] = []
    for j in range(nr):
        changed = np.nonzero(stoich[j])[0]
        delta_sp.extend(changed.tolist())
        delta_val.extend(stoich[j, changed].tolist())
        delta_ptr[j + 1] = len(delta_sp)
        dep_rx.extend(sorted({k for s in changed for k in readers[s]}))
        dep_ptr[j + 1] = len(dep_rx)
    dep_rx.extend(range(nr))
    dep_ptr[nr + 1] = len(dep_rx)
    x0 = np.array([model.initial.get(n, 0) for n in names], dtype=np.float64)
    return CompiledModel(
        names, x0, ipar, fpar, delta_ptr, np.array(delta_sp, np.int64), np.array(delta_val, np.int64),
        dep_ptr, np.array(dep_rx, np.int64), stoich,
    )


@dataclass(frozen=True, eq=False)
class CrnModel:
    species: tuple
    reactions: tuple
    initial: Mapping[str, int] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "species", tuple(self.species))
        object.__setattr__(self, "reactions", tuple(self.reactions))
        object.__setattr__(self, "initial", {str(k): int(v) for k, v in dict(self.initial).items()})

    def __eq__(self, other):
        if not isinstance(other, CrnModel):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(self.to_yaml())

    @property
    def species_names(self) -> tuple:
        return tuple(s.name for s in self.species)

    def index(self, name: str) -> int:
        try:
            return self.species_names.index(name)
        except ValueError:
            raise ModelError(f"unknown species {name!r}") from None

    def role_of(self, name: str) -> str:
        for s in self.species:
            if s.name == name:
                return s.role
        raise ModelError(f"unknown species {name!r}")

    def names_with_role(self, role: str) -> list[str]:
        return [s.name for s in self.species if s.role == role]

    def initial_state(self) -> dict[str, int]:
        return {n: self.initial.get(n, 0) for n in self.species_names}

    def with_initial(self, **counts) -> "CrnModel":
        for n in counts:
            self.index(n)
        return CrnModel(self.species, self.reactions, {**self.initial, **counts}, self.name)

    def merged(self, other: "CrnModel", name: str | None = None) -> "CrnModel":
        mine = set(self.species_names)
        clash = [s.name for s in other.species if s.name in mine]
        if clash:
            raise ModelError(f"cannot merge, shared species: {clash}")
        return CrnModel(
            self.species + other.species,
            self.reactions + other.reactions,
            {**self.initial, **other.initial},
            name if name is not None else self.name,
        )

    @cached_property
    def compiled(self) -> CompiledModel:
        return compile_model(self)

    # serialisation -------------------------------------------------------

    def to_dict(self) -> dict:
        reactions = []
        for r in self.reactions:
            law = {"kind": r.law.kind, "rate": float(r.law.rate)}
            if r.law.kind == HILL_PRODUCTION:
                law.update(repressor=r.law.repressor, n=float(r.law.hill_n))
            entry = {
                "name": r.name,
                "reactants": dict(r.reactants),
                "products": dict(r.products),
                "law": law,
            }
            if r.gate is not None:
                entry["gate"] = {"species": r.gate.species, "half": float(r.gate.half), "n": float(r.gate.n)}
            reactions.append(entry)
        return {
            "name": self.name,
            "species": [{"name": s.name, "role": s.role} for s in self.species],
            "initial": {n: int(self.initial.get(n, 0)) for n in self.species_names},
            "reactions": reactions,
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "CrnModel":
        species = [Species(s["name"], s.get("role", "generic")) for s in doc["species"]]
        reactions = []
        for entry in doc.get("reactions", []):
            law = entry.get("law", {})
            kind = law.get("kind", MASS_ACTION)
            if kind == HILL_PRODUCTION:
                rl = RateLaw.hill(law["rate"], law["repressor"], law.get("n", 1.0))
            else:
                rl = RateLaw(kind, float(law.get("rate", 1.0)))
            gate = entry.get("gate")
            gate = HillGate(gate["species"], float(gate["half"]), float(gate.get("n", 1.0))) if gate else None
            reactions.append(Reaction(entry.get("reactants") or {}, entry.get("products") or {}, rl, gate, entry.get("name", "")))
        return cls(species, reactions, doc.get("initial", {}), doc.get("name", ""))

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_yaml(cls, text: str) -> "CrnModel":
        return cls.from_dict(yaml.safe_load(text))
