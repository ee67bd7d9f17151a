"""Domain model for single-terminal load planning instances.

An instance describes the outbound side of one terminal: timed sort pairs
(arcs), the trailer types allowed on each pair, and splittable commodities
with a primary flow path plus optional alternates. String ids in the JSON
file are interned to dense integer indices on load so solver code can work
with flat arrays; the original names are kept for round-tripping.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, replace
from typing import IO, Mapping, Optional, Union


class ParseError(ValueError):
    """Raised when the input stream is not well-formed JSON."""


class ValidationError(ValueError):
    """Raised when a document violates an instance invariant.

    ``path`` points at the offending field, e.g. ``commodities[2].primary``.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


class IncompatiblePair(ValueError):
    """Raised when a (commodity, sort pair) lookup is outside the compatible set."""


class DegenerateInstance(ValueError):
    """Raised when an instance cannot support a requested model (e.g. no
    compatible trailer for a commodity)."""


#: Fallback diversion-cost weight for instances where the weight formula is
#: undefined (no alternates, or zero total volume). Small enough that the
#: reference-distance term always dominates.
EPSILON_FALLBACK = 1e-9


class Sort(enum.Enum):
    """Sorting periods of an operating day, in chronological order."""

    DAY = "Day"
    TWILIGHT = "Twilight"
    NIGHT = "Night"
    SUNRISE = "Sunrise"

    @property
    def position(self) -> int:
        return _SORT_POSITION[self]


_SORT_POSITION = {s: i for i, s in enumerate(Sort)}


class ServiceClass(enum.Enum):
    ONE_DAY = "OneDay"
    TWO_DAY = "TwoDay"
    THREE_DAY = "ThreeDay"
    OTHER = "Other"

    @property
    def urgency(self) -> int:
        """Service-class weight used in the diversion cost (1 = most urgent)."""
        return _URGENCY[self]


_URGENCY = {
    ServiceClass.ONE_DAY: 1,
    ServiceClass.TWO_DAY: 2,
    ServiceClass.THREE_DAY: 3,
    ServiceClass.OTHER: 4,
}


class Scenario(enum.Enum):
    """Compatible-path restriction applied before solving."""

    PRIMARY_ONLY = "primary-only"
    ONE_ALT = "one-alt"
    ALL_ALT = "all-alt"


@dataclass(frozen=True)
class NodeId:
    """A (terminal, sort, day) point of the time-space network."""

    terminal: str
    sort: Sort
    day: int

    @property
    def time_index(self) -> int:
        """Global chronological index of the node's sort period."""
        return self.day * len(Sort) + self.sort.position


@dataclass(frozen=True)
class TrailerType:
    index: int
    name: str
    capacity: float
    cost: float


@dataclass(frozen=True)
class SortPair:
    """A directed dispatch arc from an origin node to a destination node."""

    index: int
    name: str
    origin: NodeId
    destination: NodeId
    allowed_trailers: tuple[int, ...]
    load_pair: Optional[str] = None


@dataclass(frozen=True)
class LoadPair:
    """Consecutive sort pairs sharing a destination node (metadata only;
    capacity in the optimization models stays per sort pair)."""

    name: str
    members: tuple[int, ...]


@dataclass(frozen=True)
class Commodity:
    index: int
    name: str
    volume: float
    service_class: ServiceClass
    primary: int
    alternates: tuple[int, ...]
    alt_distance: Mapping[int, float]

    @property
    def compatible(self) -> tuple[int, ...]:
        """Compatible sort pairs: the primary followed by the alternates."""
        return (self.primary,) + self.alternates


@dataclass(frozen=True)
class ReferencePlan:
    """Planned trailer counts per compatible (sort pair, trailer type)."""

    gamma: Mapping[tuple[int, int], int]

    def count(self, s: int, v: int) -> int:
        return int(self.gamma.get((s, v), 0))


@dataclass(frozen=True)
class Instance:
    """A validated, immutable terminal snapshot; safe to share across solves."""

    sort_pairs: tuple[SortPair, ...]
    trailer_types: tuple[TrailerType, ...]
    commodities: tuple[Commodity, ...]
    reference_plan: Optional[ReferencePlan] = None

    @property
    def num_pairs(self) -> int:
        return len(self.sort_pairs)

    @property
    def num_types(self) -> int:
        return len(self.trailer_types)

    @property
    def num_commodities(self) -> int:
        return len(self.commodities)

    def total_volume(self) -> float:
        return sum(k.volume for k in self.commodities)

    def compatible_columns(self) -> list[tuple[int, int]]:
        """All (sort pair, trailer type) index pairs with the pair allowing
        the type, in (s, v) lexicographic order."""
        return [
            (sp.index, v) for sp in self.sort_pairs for v in sp.allowed_trailers
        ]

    def commodities_on_pair(self, s: int) -> list[Commodity]:
        return [k for k in self.commodities if s in k.compatible]

    def pair_volume_bound(self, s: int) -> float:
        """Total volume that could possibly be routed over sort pair ``s``."""
        return sum(k.volume for k in self.commodities if s in k.compatible)

    def load_pairs(self) -> list[LoadPair]:
        """Load-pair groups derived from the ``load_pair`` tags, members in
        chronological origin order."""
        groups: dict[str, list[SortPair]] = {}
        for sp in self.sort_pairs:
            if sp.load_pair is not None:
                groups.setdefault(sp.load_pair, []).append(sp)
        out = []
        for name in sorted(groups):
            members = sorted(groups[name], key=lambda p: p.origin.time_index)
            out.append(LoadPair(name=name, members=tuple(p.index for p in members)))
        return out


# ---------------------------------------------------------------------------
# Parsing and validation


def _require(doc: dict, key: str, path: str):
    if key not in doc:
        raise ValidationError(f"{path}.{key}", "missing required field")
    return doc[key]


def _parse_node(doc, path: str) -> NodeId:
    if not isinstance(doc, dict):
        raise ValidationError(path, "node must be an object")
    terminal = _require(doc, "terminal", path)
    if not isinstance(terminal, str) or not terminal:
        raise ValidationError(f"{path}.terminal", "terminal must be a nonempty string")
    sort_raw = _require(doc, "sort", path)
    try:
        sort = Sort(sort_raw)
    except ValueError:
        raise ValidationError(f"{path}.sort", f"unknown sort {sort_raw!r}") from None
    day = _require(doc, "day", path)
    if not isinstance(day, int) or day < 1:
        raise ValidationError(f"{path}.day", "day must be an integer >= 1")
    return NodeId(terminal=terminal, sort=sort, day=day)


def _parse_number(value, path: str, *, minimum: float, strict: bool) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(path, "expected a number")
    x = float(value)
    if math.isnan(x) or math.isinf(x):
        raise ValidationError(path, "number must be finite")
    if x < minimum or (strict and x <= minimum):
        op = ">" if strict else ">="
        raise ValidationError(path, f"must be {op} {minimum}")
    return x


def parse_instance(doc: dict) -> Instance:
    """Validate a decoded JSON document and intern ids to dense indices."""
    if not isinstance(doc, dict):
        raise ValidationError("$", "top level must be an object")

    raw_types = _require(doc, "trailer_types", "$")
    if not isinstance(raw_types, list) or not raw_types:
        raise ValidationError("$.trailer_types", "must be a nonempty list")
    types: list[TrailerType] = []
    type_index: dict[str, int] = {}
    for i, t in enumerate(raw_types):
        path = f"trailer_types[{i}]"
        name = _require(t, "id", path)
        if name in type_index:
            raise ValidationError(f"{path}.id", f"duplicate trailer type id {name!r}")
        cap = _parse_number(_require(t, "capacity", path), f"{path}.capacity", minimum=0.0, strict=True)
        cost = _parse_number(_require(t, "cost", path), f"{path}.cost", minimum=0.0, strict=True)
        type_index[name] = i
        types.append(TrailerType(index=i, name=name, capacity=cap, cost=cost))

    raw_pairs = _require(doc, "sort_pairs", "$")
    if not isinstance(raw_pairs, list) or not raw_pairs:
        raise ValidationError("$.sort_pairs", "must be a nonempty list")
    pairs: list[SortPair] = []
    pair_index: dict[str, int] = {}
    for i, p in enumerate(raw_pairs):
        path = f"sort_pairs[{i}]"
        name = _require(p, "id", path)
        if name in pair_index:
            raise ValidationError(f"{path}.id", f"duplicate sort pair id {name!r}")
        origin = _parse_node(_require(p, "origin", path), f"{path}.origin")
        dest = _parse_node(_require(p, "destination", path), f"{path}.destination")
        if origin == dest:
            raise ValidationError(f"{path}.destination", "origin and destination must differ")
        raw_allowed = _require(p, "allowed_trailers", path)
        if not isinstance(raw_allowed, list) or not raw_allowed:
            raise ValidationError(f"{path}.allowed_trailers", "must be a nonempty list")
        allowed = []
        for j, tname in enumerate(raw_allowed):
            if tname not in type_index:
                raise ValidationError(
                    f"{path}.allowed_trailers[{j}]", f"unknown trailer type {tname!r}"
                )
            allowed.append(type_index[tname])
        if len(set(allowed)) != len(allowed):
            raise ValidationError(f"{path}.allowed_trailers", "duplicate trailer type")
        load_pair = p.get("load_pair")
        if load_pair is not None and not isinstance(load_pair, str):
            raise ValidationError(f"{path}.load_pair", "must be a string or null")
        pair_index[name] = i
        pairs.append(
            SortPair(
                index=i,
                name=name,
                origin=origin,
                destination=dest,
                allowed_trailers=tuple(allowed),
                load_pair=load_pair,
            )
        )

    raw_comms = _require(doc, "commodities", "$")
    if not isinstance(raw_comms, list):
        raise ValidationError("$.commodities", "must be a list")
    comms: list[Commodity] = []
    comm_index: dict[str, int] = {}
    for i, c in enumerate(raw_comms):
        path = f"commodities[{i}]"
        name = _require(c, "id", path)
        if name in comm_index:
            raise ValidationError(f"{path}.id", f"duplicate commodity id {name!r}")
        volume = _parse_number(_require(c, "volume", path), f"{path}.volume", minimum=0.0, strict=False)
        sc_raw = _require(c, "service_class", path)
        try:
            sc = ServiceClass(sc_raw)
        except ValueError:
            raise ValidationError(
                f"{path}.service_class", f"unknown service class {sc_raw!r}"
            ) from None
        primary_name = _require(c, "primary", path)
        if primary_name not in pair_index:
            raise ValidationError(
                f"{path}.primary", f"commodity {name!r} references unknown sort pair {primary_name!r}"
            )
        primary = pair_index[primary_name]
        raw_alts = c.get("alternates", [])
        if not isinstance(raw_alts, list):
            raise ValidationError(f"{path}.alternates", "must be a list")
        alternates = []
        for j, aname in enumerate(raw_alts):
            if aname not in pair_index:
                raise ValidationError(
                    f"{path}.alternates[{j}]",
                    f"commodity {name!r} references unknown sort pair {aname!r}",
                )
            alt = pair_index[aname]
            if alt == primary:
                raise ValidationError(
                    f"{path}.alternates[{j}]", "primary must not repeat in alternates"
                )
            if alt in alternates:
                raise ValidationError(f"{path}.alternates[{j}]", "duplicate alternate")
            alternates.append(alt)
        raw_dist = c.get("alt_distance", {})
        if not isinstance(raw_dist, dict):
            raise ValidationError(f"{path}.alt_distance", "must be an object")
        alt_distance: dict[int, float] = {}
        for aname, dist in raw_dist.items():
            if aname not in pair_index:
                raise ValidationError(
                    f"{path}.alt_distance.{aname}", f"unknown sort pair {aname!r}"
                )
            alt_distance[pair_index[aname]] = _parse_number(
                dist, f"{path}.alt_distance.{aname}", minimum=0.0, strict=False
            )
        for alt in alternates:
            if alt not in alt_distance:
                raise ValidationError(
                    f"{path}.alt_distance",
                    f"missing distance for alternate {pairs[alt].name!r}",
                )
        extra = set(alt_distance) - set(alternates)
        if extra:
            bad = pairs[min(extra)].name
            raise ValidationError(
                f"{path}.alt_distance.{bad}", "distance given for a non-alternate pair"
            )
        comm_index[name] = i
        comms.append(
            Commodity(
                index=i,
                name=name,
                volume=volume,
                service_class=sc,
                primary=primary,
                alternates=tuple(alternates),
                alt_distance=alt_distance,
            )
        )

    reference = None
    raw_ref = doc.get("reference_plan")
    if raw_ref is not None:
        if not isinstance(raw_ref, list):
            raise ValidationError("$.reference_plan", "must be a list or null")
        gamma: dict[tuple[int, int], int] = {}
        for i, entry in enumerate(raw_ref):
            path = f"reference_plan[{i}]"
            sname = _require(entry, "sort_pair", path)
            if sname not in pair_index:
                raise ValidationError(f"{path}.sort_pair", f"unknown sort pair {sname!r}")
            tname = _require(entry, "trailer_type", path)
            if tname not in type_index:
                raise ValidationError(f"{path}.trailer_type", f"unknown trailer type {tname!r}")
            s, v = pair_index[sname], type_index[tname]
            if v not in pairs[s].allowed_trailers:
                raise ValidationError(
                    f"{path}.trailer_type",
                    f"type {tname!r} is not allowed on sort pair {sname!r}",
                )
            count = _require(entry, "count", path)
            if isinstance(count, bool) or not isinstance(count, int) or count < 0:
                raise ValidationError(f"{path}.count", "count must be an integer >= 0")
            if (s, v) in gamma:
                raise ValidationError(path, f"duplicate reference entry for ({sname}, {tname})")
            gamma[(s, v)] = count
        reference = ReferencePlan(gamma=gamma)

    inst = Instance(
        sort_pairs=tuple(pairs),
        trailer_types=tuple(types),
        commodities=tuple(comms),
        reference_plan=reference,
    )
    _validate_load_pairs(inst)
    return inst


def _validate_load_pairs(inst: Instance) -> None:
    groups: dict[str, list[SortPair]] = {}
    for sp in inst.sort_pairs:
        if sp.load_pair is not None:
            groups.setdefault(sp.load_pair, []).append(sp)
    for name, members in groups.items():
        dests = {m.destination for m in members}
        if len(dests) > 1:
            raise ValidationError(
                f"load_pair.{name}", "members of a load pair must share a destination node"
            )
        times = sorted(m.origin.time_index for m in members)
        if len(set(times)) != len(times):
            raise ValidationError(
                f"load_pair.{name}", "members must originate in distinct sorts"
            )
        for a, b in zip(times, times[1:]):
            if b != a + 1:
                raise ValidationError(
                    f"load_pair.{name}", "member origin sorts must be consecutive"
                )


Source = Union[bytes, str, IO[bytes], IO[str]]


def load_instance(source: Source, format: str = "json") -> Instance:
    """Load and validate an instance from JSON bytes, text, or a stream."""
    if format.lower() != "json":
        raise ValueError(f"unsupported format {format!r}")
    data = source.read() if hasattr(source, "read") else source
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from exc
    return parse_instance(doc)


def instance_to_doc(inst: Instance) -> dict:
    """Serialize with deterministic field ordering (round-trips via load)."""

    def node(n: NodeId) -> dict:
        return {"terminal": n.terminal, "sort": n.sort.value, "day": n.day}

    doc = {
        "sort_pairs": [
            {
                "id": sp.name,
                "origin": node(sp.origin),
                "destination": node(sp.destination),
                "allowed_trailers": [inst.trailer_types[v].name for v in sp.allowed_trailers],
                "load_pair": sp.load_pair,
            }
            for sp in inst.sort_pairs
        ],
        "trailer_types": [
            {"id": t.name, "capacity": t.capacity, "cost": t.cost}
            for t in inst.trailer_types
        ],
        "commodities": [
            {
                "id": k.name,
                "volume": k.volume,
                "service_class": k.service_class.value,
                "primary": inst.sort_pairs[k.primary].name,
                "alternates": [inst.sort_pairs[a].name for a in k.alternates],
                "alt_distance": {
                    inst.sort_pairs[a].name: k.alt_distance[a] for a in k.alternates
                },
            }
            for k in inst.commodities
        ],
        "reference_plan": None,
    }
    if inst.reference_plan is not None:
        doc["reference_plan"] = [
            {
                "sort_pair": inst.sort_pairs[s].name,
                "trailer_type": inst.trailer_types[v].name,
                "count": inst.reference_plan.gamma[(s, v)],
            }
            for (s, v) in sorted(inst.reference_plan.gamma)
        ]
    return doc


def save_instance(inst: Instance) -> str:
    return json.dumps(instance_to_doc(inst), indent=2) + "\n"


# ---------------------------------------------------------------------------
# Scenario restriction and diversion costs


def _as_commodity(inst: Instance, k) -> Commodity:
    return inst.commodities[k] if isinstance(k, int) else k


def _as_pair_index(s) -> int:
    return s if isinstance(s, int) else s.index


def diversion_cost(inst: Instance, k, s) -> float:
    """Per-unit cost of placing commodity ``k`` on compatible pair ``s``:
    zero on the primary, else the alternate's onward distance plus ten times
    the service-class urgency weight."""
    comm = _as_commodity(inst, k)
    s_idx = _as_pair_index(s)
    if s_idx == comm.primary:
        return 0.0
    if s_idx not in comm.alternates:
        raise IncompatiblePair(
            f"sort pair {inst.sort_pairs[s_idx].name!r} is not compatible with "
            f"commodity {comm.name!r}"
        )
    return comm.alt_distance[s_idx] + 10.0 * comm.service_class.urgency


def max_diversion_cost(inst: Instance) -> float:
    """Largest per-unit diversion cost over all (commodity, alternate) pairs;
    0.0 when no commodity has an alternate."""
    best = 0.0
    for k in inst.commodities:
        for a in k.alternates:
            best = max(best, diversion_cost(inst, k, a))
    return best


def epsilon_weight(inst: Instance) -> float:
    """Weight scaling the diversion-cost term below one unit of reference
    distance: one over (max diversion cost times total volume). Falls back to
    ``EPSILON_FALLBACK`` on degenerate instances (no alternates / zero volume)."""
    max_term = max_diversion_cost(inst)
    total = inst.total_volume()
    if max_term <= 0.0 or total <= 0.0:
        return EPSILON_FALLBACK
    return 1.0 / (max_term * total)


def restrict_scenario(inst: Instance, scenario: Scenario) -> Instance:
    """Truncate each commodity's alternates per the scenario. All-alt is the
    identity; one-alt keeps the alternate with the cheapest diversion cost
    (ties broken by lowest sort-pair index)."""
    if scenario is Scenario.ALL_ALT:
        return replace(inst)
    comms = []
    for k in inst.commodities:
        if scenario is Scenario.PRIMARY_ONLY or not k.alternates:
            comms.append(replace(k, alternates=(), alt_distance={}))
        else:
            best = min(k.alternates, key=lambda a: (diversion_cost(inst, k, a), a))
            comms.append(
                replace(k, alternates=(best,), alt_distance={best: k.alt_distance[best]})
            )
    return replace(inst, commodities=tuple(comms))
