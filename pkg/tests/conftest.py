import json

import pytest

from loadplan.network import Instance, load_instance


def node(terminal, sort, day):
    return {"terminal": terminal, "sort": sort, "day": day}


def make_doc(sort_pairs, trailer_types, commodities, reference_plan=None):
    return {
        "sort_pairs": sort_pairs,
        "trailer_types": trailer_types,
        "commodities": commodities,
        "reference_plan": reference_plan,
    }


def instance_from_doc(doc) -> Instance:
    return load_instance(json.dumps(doc))


def t1_doc():
    """Two pairs, one 50-cube type, three commodities; the middle commodity
    can split between the pairs."""
    return make_doc(
        sort_pairs=[
            {
                "id": "s1",
                "origin": node("T", "Day", 1),
                "destination": node("A", "Night", 1),
                "allowed_trailers": ["v50"],
                "load_pair": None,
            },
            {
                "id": "s2",
                "origin": node("T", "Twilight", 1),
                "destination": node("B", "Sunrise", 2),
                "allowed_trailers": ["v50"],
                "load_pair": None,
            },
        ],
        trailer_types=[{"id": "v50", "capacity": 50.0, "cost": 50.0}],
        commodities=[
            {
                "id": "k1",
                "volume": 60.0,
                "service_class": "TwoDay",
                "primary": "s1",
                "alternates": [],
                "alt_distance": {},
            },
            {
                "id": "k2",
                "volume": 30.0,
                "service_class": "TwoDay",
                "primary": "s1",
                "alternates": ["s2"],
                "alt_distance": {"s2": 25.0},
            },
            {
                "id": "k3",
                "volume": 40.0,
                "service_class": "OneDay",
                "primary": "s2",
                "alternates": [],
                "alt_distance": {},
            },
        ],
        reference_plan=[
            {"sort_pair": "s1", "trailer_type": "v50", "count": 2},
            {"sort_pair": "s2", "trailer_type": "v50", "count": 2},
        ],
    )


@pytest.fixture
def t1() -> Instance:
    return instance_from_doc(t1_doc())


def two_pair_doc():
    """Both pairs interchangeable for every commodity; capacity 2 trailers.
    With one trailer predicted per pair there are 2 cubes of excess that a
    single extra trailer can absorb on either pair."""
    return make_doc(
        sort_pairs=[
            {
                "id": "sA",
                "origin": node("T", "Day", 1),
                "destination": node("A", "Night", 1),
                "allowed_trailers": ["q2"],
                "load_pair": None,
            },
            {
                "id": "sB",
                "origin": node("T", "Day", 1),
                "destination": node("B", "Night", 1),
                "allowed_trailers": ["q2"],
                "load_pair": None,
            },
        ],
        trailer_types=[{"id": "q2", "capacity": 2.0, "cost": 2.0}],
        commodities=[
            {
                "id": "k1",
                "volume": 2.0,
                "service_class": "Other",
                "primary": "sA",
                "alternates": ["sB"],
                "alt_distance": {"sB": 1.0},
            },
            {
                "id": "k2",
                "volume": 2.0,
                "service_class": "Other",
                "primary": "sA",
                "alternates": ["sB"],
                "alt_distance": {"sB": 1.0},
            },
            {
                "id": "k3",
                "volume": 2.0,
                "service_class": "Other",
                "primary": "sB",
                "alternates": ["sA"],
                "alt_distance": {"sA": 1.0},
            },
        ],
    )


@pytest.fixture
def two_pair() -> Instance:
    return instance_from_doc(two_pair_doc())


def fig8_doc():
    """Three commodities out of one terminal; the third can split across its
    primary and two alternates. Splitting saves one 5-cube trailer."""
    return make_doc(
        sort_pairs=[
            {
                "id": "spC",
                "origin": node("B", "Twilight", 1),
                "destination": node("C", "Sunrise", 2),
                "allowed_trailers": ["u5"],
                "load_pair": None,
            },
            {
                "id": "spE",
                "origin": node("B", "Twilight", 1),
                "destination": node("E", "Sunrise", 2),
                "allowed_trailers": ["u5"],
                "load_pair": None,
            },
            {
                "id": "spD",
                "origin": node("B", "Twilight", 1),
                "destination": node("D", "Twilight", 2),
                "allowed_trailers": ["u5"],
                "load_pair": None,
            },
        ],
        trailer_types=[{"id": "u5", "capacity": 5.0, "cost": 5.0}],
        commodities=[
            {
                "id": "toC",
                "volume": 4.0,
                "service_class": "TwoDay",
                "primary": "spC",
                "alternates": [],
                "alt_distance": {},
            },
            {
                "id": "toE",
                "volume": 3.0,
                "service_class": "TwoDay",
                "primary": "spE",
                "alternates": [],
                "alt_distance": {},
            },
            {
                "id": "toF",
                "volume": 3.0,
                "service_class": "TwoDay",
                "primary": "spC",
                "alternates": ["spE", "spD"],
                "alt_distance": {"spE": 2.0, "spD": 1.0},
            },
        ],
    )


@pytest.fixture
def fig8() -> Instance:
    return instance_from_doc(fig8_doc())


def minimal_doc():
    return make_doc(
        sort_pairs=[
            {
                "id": "s1",
                "origin": node("T", "Day", 1),
                "destination": node("A", "Night", 1),
                "allowed_trailers": ["v1"],
                "load_pair": None,
            }
        ],
        trailer_types=[{"id": "v1", "capacity": 10.0, "cost": 10.0}],
        commodities=[
            {
                "id": "k1",
                "volume": 7.0,
                "service_class": "OneDay",
                "primary": "s1",
                "alternates": [],
                "alt_distance": {},
            }
        ],
    )


@pytest.fixture
def minimal() -> Instance:
    return instance_from_doc(minimal_doc())


# Random-instance generator shared by the solver equivalence tests.

SORTS = ["Day", "Twilight", "Night", "Sunrise"]
CLASSES = ["OneDay", "TwoDay", "ThreeDay", "Other"]


def single_type_doc(n_pairs, volumes_by_pair, capacity=50.0, all_compatible=False):
    """One trailer type everywhere; commodities pinned to one pair or
    compatible with all of them."""
    pairs = [
        {
            "id": f"s{i}",
            "origin": node("T", SORTS[i % 4], 1),
            "destination": node(f"D{i}", "Day", 2),
            "allowed_trailers": ["v"],
            "load_pair": None,
        }
        for i in range(n_pairs)
    ]
    comms = []
    kid = 0
    for s, volumes in volumes_by_pair.items():
        for q in volumes:
            alternates = (
                [f"s{j}" for j in range(n_pairs) if j != s] if all_compatible else []
            )
            comms.append(
                {
                    "id": f"k{kid}",
                    "volume": float(q),
                    "service_class": "TwoDay",
                    "primary": f"s{s}",
                    "alternates": alternates,
                    "alt_distance": {a: 1.0 for a in alternates},
                }
            )
            kid += 1
    return make_doc(
        pairs, [{"id": "v", "capacity": capacity, "cost": capacity}], comms
    )


def cover_doc(memberships, n_pairs):
    """Unit-volume, unit-cost construction whose optimum is a minimum set
    cover; memberships maps commodity -> list of pair indices (first is the
    primary)."""
    q = max(
        sum(1 for pairs in memberships.values() if s in pairs) for s in range(n_pairs)
    )
    pairs = [
        {
            "id": f"s{i}",
            "origin": node("T", "Day", 1),
            "destination": node(f"D{i}", "Day", 2),
            "allowed_trailers": ["v"],
            "load_pair": None,
        }
        for i in range(n_pairs)
    ]
    comms = []
    for k, members in memberships.items():
        comms.append(
            {
                "id": f"k{k}",
                "volume": 1.0,
                "service_class": "TwoDay",
                "primary": f"s{members[0]}",
                "alternates": [f"s{j}" for j in members[1:]],
                "alt_distance": {f"s{j}": 1.0 for j in members[1:]},
            }
        )
    return make_doc(pairs, [{"id": "v", "capacity": float(q), "cost": 1.0}], comms)


def random_doc(
    rng,
    max_pairs=3,
    max_types=2,
    max_comms=4,
    with_reference=True,
    integral_volumes=False,
    shared_types=False,
):
    n_pairs = int(rng.integers(1, max_pairs + 1))
    n_types = int(rng.integers(1, max_types + 1))
    n_comms = int(rng.integers(1, max_comms + 1))
    types = [
        {
            "id": f"v{t}",
            "capacity": float(rng.integers(2, 8)),
            "cost": float(rng.integers(1, 8)),
        }
        for t in range(n_types)
    ]
    pairs = []
    for i in range(n_pairs):
        if shared_types:
            allowed = [f"v{t}" for t in range(n_types)]
        else:
            allowed = [f"v{t}" for t in range(n_types) if rng.random() < 0.7]
            if not allowed:
                allowed = [f"v{int(rng.integers(0, n_types))}"]
        pairs.append(
            {
                "id": f"s{i}",
                "origin": node("T", SORTS[i % 4], 1),
                "destination": node(f"D{i}", SORTS[(i + 1) % 4], 1),
                "allowed_trailers": allowed,
                "load_pair": None,
            }
        )
    comms = []
    for k in range(n_comms):
        primary = int(rng.integers(0, n_pairs))
        alts = [s for s in range(n_pairs) if s != primary and rng.random() < 0.5]
        if integral_volumes:
            volume = float(rng.integers(0, 13))
        else:
            volume = float(round(float(rng.uniform(0, 12)), 1))
        comms.append(
            {
                "id": f"k{k}",
                "volume": volume,
                "service_class": CLASSES[int(rng.integers(0, 4))],
                "primary": f"s{primary}",
                "alternates": [f"s{a}" for a in alts],
                "alt_distance": {
                    f"s{a}": float(round(float(rng.uniform(0, 30)), 1)) for a in alts
                },
            }
        )
    reference = None
    if with_reference:
        reference = []
        for p in pairs:
            for tname in p["allowed_trailers"]:
                c = int(rng.integers(0, 4))
                if c:
                    reference.append(
                        {"sort_pair": p["id"], "trailer_type": tname, "count": c}
                    )
    return make_doc(pairs, types, comms, reference)
