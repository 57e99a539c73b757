"""Degree bookkeeping for maps from a decorated surface to the 2-sphere.

A closed orientable surface arrives already cut into pairs of pants and
cylinders along a family of disjoint loops.  Each loop is thickened to an
annulus with an s side and an n side; the annulus is sent across the
equatorial band, its s boundary to the south pole SP and its n boundary to
the north pole NP.  Every region then sees a pole marking on each boundary
slot and is mapped by one of

* collapse(SP) / collapse(NP)   all slots carry the same marking
* cylinder_diffeo              a cylinder marked {SP, NP}
* subdivided_pants             a pants marked {SP, SP, NP} (or {NP, NP, SP}):
                               a new circle parallel to the odd boundary is
                               labelled with the majority pole, leaving a
                               {majority, odd} cylinder mapped diffeomorphically
                               and a uniformly marked pants that collapses.

Text format, one declaration per line (``#`` starts a comment)::

    region <id> pants|cylinder
    annulus <loop_id> s=<region>:<slot> n=<region>:<slot>
    seam <id> <region>:<slot> <region>:<slot> pole=SP|NP

Seams are circles that were already assigned a pole (they appear in the
surface induced by a plan after its subdivisions); they carry no band.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import ValidationError

SLOTS = {"pants": 3, "cylinder": 2}
POLES = ("SP", "NP")


@dataclass(frozen=True)
class Region:
    id: str
    kind: str

    def __post_init__(self):
        if self.kind not in SLOTS:
            raise ValidationError(f"region {self.id}: unknown kind {self.kind!r}")

    @property
    def n_slots(self) -> int:
        return SLOTS[self.kind]


Slot = tuple[str, int]


@dataclass(frozen=True)
class Annulus:
    loop_id: str
    side_s: Slot
    side_n: Slot


@dataclass(frozen=True)
class Seam:
    id: str
    side_a: Slot
    side_b: Slot
    pole: str

    def __post_init__(self):
        if self.pole not in POLES:
            raise ValidationError(f"seam {self.id}: pole must be SP or NP")


@dataclass(frozen=True)
class DecoratedSurface:
    regions: tuple[Region, ...]
    annuli: tuple[Annulus, ...]
    seams: tuple[Seam, ...] = ()

    @property
    def genus(self) -> int:
        return validate_surface(self).genus

    def region(self, rid: str) -> Region:
        for r in self.regions:
            if r.id == rid:
                return r
        raise KeyError(rid)


@dataclass(frozen=True)
class SurfaceSummary:
    genus: int
    euler_characteristic: int


@dataclass(frozen=True)
class RegionAction:
    kind: str  # collapse | cylinder_diffeo | subdivided_pants
    pole: str | None = None  # collapse pole, or the residual collapse pole of a subdivision
    new_circle_label: str | None = None
    parallel_slot: int | None = None  # the odd boundary the new circle runs along

    def as_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.pole is not None:
            d["pole"] = self.pole
        if self.new_circle_label is not None:
            d["new_circle_label"] = self.new_circle_label
            d["parallel_slot"] = self.parallel_slot
        return d

    def __str__(self) -> str:
        if self.kind == "collapse":
            return f"collapse({self.pole})"
        if self.kind == "subdivided_pants":
            return f"subdivided_pants({self.new_circle_label}, {self.pole})"
        return self.kind


@dataclass(frozen=True)
class MapPlan:
    markings: dict  # (region, slot) -> SP | NP
    actions: dict  # region id -> RegionAction
    bands: dict  # loop id -> orientation of the equatorial band (+1)
    degree: int
    diffeo_orientation: dict = field(default_factory=dict)  # piece -> +1

    def as_dict(self) -> dict:
        return {
            "markings": {f"{r}:{s}": m for (r, s), m in sorted(self.markings.items())},
            "actions": {r: a.as_dict() for r, a in sorted(self.actions.items())},
            "bands": dict(sorted(self.bands.items())),
            "degree": self.degree,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# parsing

def _parse_slot(tok: str, lineno: int) -> Slot:
    try:
        r, s = tok.rsplit(":", 1)
        return r, int(s)
    except ValueError:
        raise ValidationError(f"line {lineno}: malformed slot {tok!r} (expected region:slot)") from None


def parse_surface(text: str) -> DecoratedSurface:
    regions, annuli, seams = [], [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[0] == "region" and len(tok) == 3:
            regions.append(Region(tok[1], tok[2]))
        elif tok[0] == "annulus" and len(tok) == 4:
            kv = dict(t.split("=", 1) for t in tok[2:] if "=" in t)
            if set(kv) != {"s", "n"}:
                raise ValidationError(f"line {lineno}: annulus needs s=<region>:<slot> and n=<region>:<slot>")
            annuli.append(Annulus(tok[1], _parse_slot(kv["s"], lineno), _parse_slot(kv["n"], lineno)))
        elif tok[0] == "seam" and len(tok) == 5 and tok[4].startswith("pole="):
            seams.append(Seam(tok[1], _parse_slot(tok[2], lineno), _parse_slot(tok[3], lineno), tok[4][5:]))
        else:
            raise ValidationError(f"line {lineno}: cannot parse {raw.strip()!r}")
    return DecoratedSurface(tuple(regions), tuple(annuli), tuple(seams))


def format_surface(s: DecoratedSurface) -> str:
    lines = [f"region {r.id} {r.kind}" for r in s.regions]
    lines += [f"annulus {a.loop_id} s={a.side_s[0]}:{a.side_s[1]} n={a.side_n[0]}:{a.side_n[1]}" for a in s.annuli]
    lines += [
        f"seam {m.id} {m.side_a[0]}:{m.side_a[1]} {m.side_b[0]}:{m.side_b[1]} pole={m.pole}" for m in s.seams
    ]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# validation

def validate_surface(s: DecoratedSurface) -> SurfaceSummary:
    if not s.annuli:
        raise ValidationError("empty loop family: at least one annulus is required")
    ids = [r.id for r in s.regions]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate region ids")
    loop_ids = [a.loop_id for a in s.annuli] + [m.id for m in s.seams]
    if len(set(loop_ids)) != len(loop_ids):
        raise ValidationError("duplicate loop or seam ids")
    kinds = {r.id: r for r in s.regions}
    used: dict[Slot, str] = {}
    edges = []
    for owner, sides in [(a.loop_id, (a.side_s, a.side_n)) for a in s.annuli] + [
        (m.id, (m.side_a, m.side_b)) for m in s.seams
    ]:
        for rid, slot in sides:
            if rid not in kinds:
                raise ValidationError(f"{owner}: unknown region {rid!r}")
            if not 0 <= slot < kinds[rid].n_slots:
                raise ValidationError(f"{owner}: slot {slot} out of range for {kinds[rid].kind} {rid}")
            if (rid, slot) in used:
                raise ValidationError(f"slot {rid}:{slot} attached twice ({used[(rid, slot)]} and {owner})")
            used[(rid, slot)] = owner
        edges.append((sides[0][0], sides[1][0]))
    for r in s.regions:
        for k in range(r.n_slots):
            if (r.id, k) not in used:
                raise ValidationError(f"dangling slot {r.id}:{k}")
    # connectivity by union-find
    parent = {rid: rid for rid in ids}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        parent[find(a)] = find(b)
    if len({find(r) for r in ids}) != 1:
        raise ValidationError("region/annulus incidence graph is disconnected")
    n_pants = sum(r.kind == "pants" for r in s.regions)
    chi = -n_pants
    if (2 - chi) % 2:
        raise ValidationError(f"Euler characteristic {chi} is odd; not a closed orientable surface")
    genus = (2 - chi) // 2
    return SurfaceSummary(genus, chi)


# ---------------------------------------------------------------------------
# markings and plans

def assign_markings(s: DecoratedSurface) -> dict:
    validate_surface(s)
    marks = {}
    for a in s.annuli:
        marks[a.side_s] = "SP"
        marks[a.side_n] = "NP"
    for m in s.seams:
        marks[m.side_a] = m.pole
        marks[m.side_b] = m.pole
    return marks


def _other(pole: str) -> str:
    return "NP" if pole == "SP" else "SP"


def build_map_plan(s: DecoratedSurface, markings: dict | None = None) -> MapPlan:
    marks = markings if markings is not None else assign_markings(s)
    actions: dict[str, RegionAction] = {}
    orient: dict[str, int] = {}
    for r in s.regions:
        try:
            ms = [marks[(r.id, k)] for k in range(r.n_slots)]
        except KeyError as exc:
            raise RuntimeError(f"region {r.id} has an unmarked slot {exc}") from None
        if len(set(ms)) == 1:
            actions[r.id] = RegionAction("collapse", ms[0])
        elif r.kind == "cylinder":
            actions[r.id] = RegionAction("cylinder_diffeo")
            orient[r.id] = 1
        else:
            major = "SP" if ms.count("SP") == 2 else "NP"
            odd = ms.index(_other(major))
            actions[r.id] = RegionAction("subdivided_pants", major, major, odd)
            orient[f"{r.id}/cyl"] = 1
    bands = {a.loop_id: 1 for a in s.annuli}
    # one preimage of a regular value near the equator per band and per
    # diffeomorphic cylinder, all orientation preserving
    degree = sum(bands.values()) + sum(orient.values())
    plan = MapPlan(marks, actions, bands, degree, orient)
    check_plan(plan, s)
    return plan


def check_plan(plan: MapPlan, s: DecoratedSurface) -> None:
    """Raise if a structural invariant of the plan fails."""
    for a in s.annuli:
        if plan.markings.get(a.side_s) != "SP" or plan.markings.get(a.side_n) != "NP":
            raise RuntimeError(f"annulus {a.loop_id}: band markings overridden")
        if plan.bands.get(a.loop_id) != 1:
            raise RuntimeError(f"annulus {a.loop_id}: band is not mapped across the equator")
    for r in s.regions:
        act = plan.actions[r.id]
        ms = sorted(plan.markings[(r.id, k)] for k in range(r.n_slots))
        if act.kind == "subdivided_pants" and ms not in (["NP", "SP", "SP"], ["NP", "NP", "SP"]):
            raise RuntimeError(f"region {r.id}: subdivided pants with markings {ms}")
        if act.kind == "cylinder_diffeo" and ms != ["NP", "SP"]:
            raise RuntimeError(f"region {r.id}: diffeomorphic cylinder with markings {ms}")
    if any(v != 1 for v in plan.diffeo_orientation.values()):
        raise RuntimeError("orientation-reversing piece")
    if plan.degree < len(s.annuli):
        raise RuntimeError("degree below the number of annuli")


def induced_surface(plan: MapPlan, s: DecoratedSurface) -> DecoratedSurface:
    """Surface after carrying out the subdivisions of ``plan``.

    A subdivided pants P becomes a cylinder ``P/cyl`` (slot 0 = the odd
    boundary, slot 1 = the new circle) and a pants ``P/rest`` (slots 0, 1 =
    the other two boundaries, slot 2 = the new circle), joined by a seam
    carrying the new circle's label.
    """
    regions, seams, rename = [], list(s.seams), {}
    for r in s.regions:
        act = plan.actions[r.id]
        if act.kind != "subdivided_pants":
            regions.append(r)
            continue
        cyl, rest = f"{r.id}/cyl", f"{r.id}/rest"
        regions += [Region(cyl, "cylinder"), Region(rest, "pants")]
        others = [k for k in range(3) if k != act.parallel_slot]
        rename[(r.id, act.parallel_slot)] = (cyl, 0)
        rename[(r.id, others[0])] = (rest, 0)
        rename[(r.id, others[1])] = (rest, 1)
        seams.append(Seam(f"{r.id}/new", (cyl, 1), (rest, 2), act.new_circle_label))

    def ren(x):
        return rename.get(x, x)

    annuli = tuple(Annulus(a.loop_id, ren(a.side_s), ren(a.side_n)) for a in s.annuli)
    seams = tuple(Seam(m.id, ren(m.side_a), ren(m.side_b), m.pole) for m in seams)
    return DecoratedSurface(tuple(regions), annuli, seams)


# ---------------------------------------------------------------------------
# fixtures and random surfaces

def torus_fixture() -> DecoratedSurface:
    return DecoratedSurface((Region("C", "cylinder"),), (Annulus("a", ("C", 0), ("C", 1)),))


def genus2_fixture() -> DecoratedSurface:
    """Two pants glued along three loops (theta graph), mixed markings."""
    return DecoratedSurface(
        (Region("P", "pants"), Region("Q", "pants")),
        (
            Annulus("a", ("P", 0), ("Q", 0)),
            Annulus("b", ("P", 1), ("Q", 1)),
            Annulus("c", ("Q", 2), ("P", 2)),
        ),
    )


def random_surface(genus: int, rng: np.random.Generator, max_extra_cylinders: int = 3) -> DecoratedSurface:
    """A random connected pants/cylinder decomposition of the closed surface of given genus.

    Extra cylinders model parallel (isotopic) loops.  Sides of every annulus
    are oriented at random.
    """
    if genus < 1:
        raise ValidationError("genus must be >= 1 (a sphere has no essential loops)")
    n_pants = 2 * genus - 2
    n_cyl = int(rng.integers(0, max_extra_cylinders + 1))
    if n_pants == 0:
        n_cyl = max(n_cyl, 1)
    regions = [Region(f"P{i}", "pants") for i in range(n_pants)] + [Region(f"C{i}", "cylinder") for i in range(n_cyl)]
    order = list(rng.permutation(len(regions)))
    free: dict[str, list[int]] = {r.id: list(range(r.n_slots)) for r in regions}
    pairs: list[tuple[Slot, Slot]] = []
    placed = [regions[order[0]].id]
    for idx in order[1:]:
        rid = regions[idx].id
        hosts = [p for p in placed if free[p]]
        host = hosts[int(rng.integers(len(hosts)))]
        hs = free[host].pop(int(rng.integers(len(free[host]))))
        rs = free[rid].pop(int(rng.integers(len(free[rid]))))
        pairs.append(((host, hs), (rid, rs)))
        placed.append(rid)
    rest = [(rid, k) for rid in sorted(free) for k in free[rid]]
    perm = rng.permutation(len(rest))
    rest = [rest[p] for p in perm]
    for a, b in zip(rest[::2], rest[1::2]):
        pairs.append((a, b))
    annuli = []
    for n, (a, b) in enumerate(pairs):
        if rng.random() < 0.5:
            a, b = b, a
        annuli.append(Annulus(f"L{n}", a, b))
    return DecoratedSurface(tuple(regions), tuple(annuli))


def plan_summary(plan: MapPlan) -> dict:
    counts: dict[str, int] = {}
    for a in plan.actions.values():
        counts[str(a)] = counts.get(str(a), 0) + 1
    return counts


def iter_slots(s: DecoratedSurface) -> Iterable[Slot]:
    for r in s.regions:
        for k in range(r.n_slots):
            yield (r.id, k)
