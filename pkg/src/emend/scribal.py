"""Scribe-aware weighted edit distance and candidate neighborhoods."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .textcore import AuthorDictionary


class CostTableError(ValueError):
    pass


def _pair(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class CostTable:
    """Per-operation edit costs.

    substitution_costs is keyed by unordered character pairs; anything not
    listed costs default_substitution.  Insertions and deletions charge
    per-character costs (space edits are cheaper so that word merges and
    splits stay within small radii).
    """

    substitution_costs: Mapping[tuple[str, str], float] = field(default_factory=dict)
    default_substitution: float = 1.0
    insert_delete_cost: float = 1.0
    space_edit_cost: float = 0.5
    indel_overrides: Mapping[str, float] = field(default_factory=dict)
    table_id: str = "default"

    def substitution(self, a: str, b: str) -> float:
        if a == b:
            return 0.0
        return self.substitution_costs.get(_pair(a, b), self.default_substitution)

    def indel(self, c: str) -> float:
        if c in self.indel_overrides:
            return self.indel_overrides[c]
        if c.isspace():
            return self.space_edit_cost
        return self.insert_delete_cost

    def alphabet(self) -> list[str]:
        chars = set()
        for a, b in self.substitution_costs:
            chars.add(a)
            chars.add(b)
        chars.update(self.indel_overrides)
        return sorted(chars)

    def validate(self) -> None:
        """Positivity, symmetry by construction, and exhaustive table triangle check."""
        if self.default_substitution <= 0 or self.insert_delete_cost <= 0 or self.space_edit_cost <= 0:
            raise CostTableError("all edit costs must be positive")
        for (a, b), cost in self.substitution_costs.items():
            if cost <= 0:
                raise CostTableError(f"substitution ({a},{b}) must have positive cost")
        for c, cost in self.indel_overrides.items():
            if cost <= 0:
                raise CostTableError(f"indel cost for {c!r} must be positive")
        alpha = self.alphabet()
        for a in alpha:
            for b in alpha:
                ab = self.substitution(a, b)
                for x in alpha:
                    if ab > self.substitution(a, x) + self.substitution(x, b) + 1e-12:
                        raise CostTableError(
                            f"triangle inequality violated: c({a},{b}) > c({a},{x}) + c({x},{b})"
                        )


def make_cost_table(
    itacized: Iterable[str] = ("ι", "υ", "η"),
    itacism_cost: float = 0.5,
    extra_substitutions: Mapping[tuple[str, str], float] | None = None,
    insert_delete_cost: float = 1.0,
    space_edit_cost: float = 0.5,
    table_id: str = "default",
) -> CostTable:
    subs: dict[tuple[str, str], float] = {}
    itacized = list(itacized)
    for i, a in enumerate(itacized):
        for b in itacized[i + 1 :]:
            subs[_pair(a, b)] = itacism_cost
    for (a, b), cost in (extra_substitutions or {}).items():
        subs[_pair(a, b)] = cost
    table = CostTable(
        substitution_costs=subs,
        insert_delete_cost=insert_delete_cost,
        space_edit_cost=space_edit_cost,
        table_id=table_id,
    )
    table.validate()
    return table


DEFAULT_COST_TABLE = make_cost_table()

# Classical Levenshtein: every edit costs 1.  Used wherever a radius of 1
# must mean "differs by exactly one character".
UNIT_COST_TABLE = CostTable(space_edit_cost=1.0, table_id="unit")


def parse_cost_table(text: str, table_id: str = "custom") -> CostTable:
    """Parse the plain-text cost config.

    Directives, one per line ('#' comments):
        itacism <char> <char> [...] <cost>
        sub <char> <char> <cost>
        indel <cost>  |  indel <char> <cost>
        space <cost>
    """
    subs: dict[tuple[str, str], float] = {}
    overrides: dict[str, float] = {}
    indel = 1.0
    space = 0.5
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "itacism":
                chars, cost = parts[1:-1], float(parts[-1])
                for i, a in enumerate(chars):
                    for b in chars[i + 1 :]:
                        subs[_pair(a, b)] = cost
            elif parts[0] == "sub":
                subs[_pair(parts[1], parts[2])] = float(parts[3])
            elif parts[0] == "indel" and len(parts) == 2:
                indel = float(parts[1])
            elif parts[0] == "indel" and len(parts) == 3:
                overrides[parts[1]] = float(parts[2])
            elif parts[0] == "space":
                space = float(parts[1])
            else:
                raise CostTableError(f"line {lineno}: unknown directive {parts[0]!r}")
        except (IndexError, ValueError) as e:
            if isinstance(e, CostTableError):
                raise
            raise CostTableError(f"line {lineno}: cannot parse {line!r}") from e
    table = CostTable(
        substitution_costs=subs,
        insert_delete_cost=indel,
        space_edit_cost=space,
        indel_overrides=overrides,
        table_id=table_id,
    )
    table.validate()
    return table


def scribal_distance(a: str, b: str, costs: CostTable = DEFAULT_COST_TABLE) -> float:
    """Minimal total edit cost between comparison-form strings (DP)."""
    if a == b:
        return 0.0
    m, n = len(a), len(b)
    prev = [0.0] * (n + 1)
    for j in range(1, n + 1):
        prev[j] = prev[j - 1] + costs.indel(b[j - 1])
    cur = [0.0] * (n + 1)
    for i in range(1, m + 1):
        ca = a[i - 1]
        del_ca = costs.indel(ca)
        cur[0] = prev[0] + del_ca
        for j in range(1, n + 1):
            cb = b[j - 1]
            best = prev[j - 1] if ca == cb else prev[j - 1] + costs.substitution(ca, cb)
            dele = prev[j] + del_ca
            if dele < best:
                best = dele
            ins = cur[j - 1] + costs.indel(cb)
            if ins < best:
                best = ins
            cur[j] = best
        prev, cur = cur, prev
    return prev[n]


@dataclass(frozen=True)
class Neighborhood:
    """Dictionary words within a given edit radius of a center word."""

    center: str
    radius: float
    members: frozenset[str]

    def __contains__(self, word: str) -> bool:
        return word in self.members

    def sorted_members(self) -> list[str]:
        return sorted(self.members)


def neighborhood(
    center: str,
    k: float,
    dictionary: AuthorDictionary,
    min_count: int | None = None,
    costs: CostTable = DEFAULT_COST_TABLE,
    index: "LengthBucketIndex | None" = None,
) -> Neighborhood:
    """Exact brute-force W_k; the optional index only prunes, never changes output."""
    if k < 0:
        raise ValueError("radius must be non-negative")
    if index is not None:
        candidates = index.candidates(center, k, min_count)
    else:
        candidates = dictionary.words(min_count)
    members = {w for w in candidates if scribal_distance(center, w, costs) <= k + 1e-12}
    members.add(center)
    return Neighborhood(center=center, radius=k, members=frozenset(members))


class LengthBucketIndex:
    """Length-difference prefilter for neighborhood queries.

    |len(w) - len(center)| * cheapest_indel is a lower bound on the distance,
    so pruning by it is lossless: results are identical to brute force.
    """

    def __init__(self, dictionary: AuthorDictionary, costs: CostTable = DEFAULT_COST_TABLE):
        self.dictionary = dictionary
        self.cheapest_indel = min(
            [costs.insert_delete_cost, costs.space_edit_cost, *costs.indel_overrides.values()]
        )
        self._by_length: dict[tuple[int, int], dict[int, list[str]]] = {}

    def _buckets(self, min_count: int | None) -> dict[int, list[str]]:
        key = self.dictionary.min_count if min_count is None else min_count
        cached = self._by_length.get((key, 0))
        if cached is None:
            cached = {}
            for w in self.dictionary.words(key):
                cached.setdefault(len(w), []).append(w)
            self._by_length[(key, 0)] = cached
        return cached

    def candidates(self, center: str, k: float, min_count: int | None) -> list[str]:
        max_diff = int(k / self.cheapest_indel + 1e-12)
        buckets = self._buckets(min_count)
        out: list[str] = []
        for length in range(max(0, len(center) - max_diff), len(center) + max_diff + 1):
            out.extend(buckets.get(length, ()))
        return out
