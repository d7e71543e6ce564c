"""Dataset parsing, implicit-feedback conversion, splitting, and popularity stats."""

from dataclasses import dataclass, field
from functools import cached_property
import math

import numpy as np

from .errors import ConfigError, EmptyDatasetError, ParseError
from .rng import substream

# format name -> (field separator, expected field count, has timestamp)
_FORMATS = {
    "ml100k": ("\t", 4, True),
    "ml1m": ("::", 4, True),
    "yahoo_r3": ("\t", 3, False),
}


@dataclass(frozen=True)
class RatingRecord:
    """One parsed rating with densely re-indexed user/item ids."""

    user_id: int
    item_id: int
    rating: float
    timestamp: int | None = None


@dataclass(frozen=True)
class LoadedRatings:
    """Parse result: records plus the dense-index -> original-id maps."""

    records: tuple
    user_ids: tuple  # dense user index -> original id
    item_ids: tuple  # dense item index -> original id

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


def load_ratings(path, format):
    """Parse a ratings file into densely re-indexed RatingRecords.

    Args:
        path: file to read.
        format: one of "ml100k" (user<TAB>item<TAB>rating<TAB>timestamp),
            "ml1m" (user::item::rating::timestamp), or
            "yahoo_r3" (user<TAB>item<TAB>rating).

    Returns:
        LoadedRatings with records in file order and the id maps retained
        for reporting.

    Raises:
        ConfigError: unknown format name.
        ParseError: malformed line (carries the 1-based line number).
        EmptyDatasetError: the file holds no records.
    """
    if format not in _FORMATS:
        raise ConfigError(
            f"format must be one of {sorted(_FORMATS)}, got {format!r}"
        )
    sep, nfields, has_ts = _FORMATS[format]

    raw = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                # ignore a trailing blank line, reject interior ones
                continue
            parts = line.split(sep)
            if len(parts) != nfields:
                raise ParseError(
                    path, lineno,
                    f"expected {nfields} '{sep}'-separated fields, got {len(parts)}",
                )
            try:
                user = int(parts[0])
                item = int(parts[1])
                rating = float(parts[2])
                ts = int(parts[3]) if has_ts else None
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc)) from None
            if not math.isfinite(rating):
                raise ParseError(path, lineno, f"non-finite rating {parts[2]!r}")
            raw.append((user, item, rating, ts))

    if not raw:
        raise EmptyDatasetError(f"{path}: no records")

    users = sorted({r[0] for r in raw})
    items = sorted({r[1] for r in raw})
    umap = {u: idx for idx, u in enumerate(users)}
    imap = {i: idx for idx, i in enumerate(items)}
    records = tuple(
        RatingRecord(umap[u], imap[i], rating, ts) for u, i, rating, ts in raw
    )
    return LoadedRatings(records, tuple(users), tuple(items))


@dataclass
class InteractionDataset:
    """Immutable user/item universe with per-user train/test positive sets.

    train_pos and test_pos are tuples of sorted int arrays indexed by user.
    I_u^- (the candidate pool for sampling) is the complement of train_pos
    and is materialized on demand via neg_items / train_mask.
    """

    num_users: int
    num_items: int
    train_pos: tuple
    test_pos: tuple
    dropped_unseen_test: int = 0
    excluded_users: int = 0

    def __post_init__(self):
        for arr in (*self.train_pos, *self.test_pos):
            arr.flags.writeable = False

    @property
    def n_train_total(self):
        return int(sum(len(a) for a in self.train_pos))

    @property
    def n_test_total(self):
        return int(sum(len(a) for a in self.test_pos))

    def neg_items(self, user):
        """Sorted array of the user's un-interacted items (train complement)."""
        return np.setdiff1d(
            np.arange(self.num_items, dtype=np.int64),
            self.train_pos[user],
            assume_unique=True,
        )

    @cached_property
    def train_mask(self):
        """Boolean matrix: train_mask[u, i] == item i is a training positive of u."""
        mask = np.zeros((self.num_users, self.num_items), dtype=bool)
        for u, items in enumerate(self.train_pos):
            mask[u, items] = True
        mask.flags.writeable = False
        return mask

    @cached_property
    def test_mask(self):
        """Boolean matrix: test_mask[u, i] == item i is a held-out positive of u."""
        mask = np.zeros((self.num_users, self.num_items), dtype=bool)
        for u, items in enumerate(self.test_pos):
            mask[u, items] = True
        mask.flags.writeable = False
        return mask

    @cached_property
    def train_pairs(self):
        """All training positives as (users, items) int arrays, user-major order."""
        users = np.repeat(
            np.arange(self.num_users, dtype=np.int64),
            [len(a) for a in self.train_pos],
        )
        items = np.concatenate([np.asarray(a, dtype=np.int64) for a in self.train_pos])
        users.flags.writeable = False
        items.flags.writeable = False
        return users, items


def to_implicit_and_split(records, split_ratio, seed):
    """Convert ratings to implicit positives and split per user.

    Every rated (user, item) pair becomes a positive regardless of rating
    value. The split is per-user random at split_ratio with at least one
    training positive per user; test items that no user trains on are
    dropped (counted in dropped_unseen_test). Deterministic under seed via
    the "split" substream.
    """
    if not 0.0 < split_ratio < 1.0:
        raise ConfigError(f"split_ratio must be in (0,1), got {split_ratio}")
    records = list(records)
    if not records:
        raise EmptyDatasetError("no records to split")

    num_users = max(r.user_id for r in records) + 1
    num_items = max(r.item_id for r in records) + 1
    per_user = [set() for _ in range(num_users)]
    for r in records:
        per_user[r.user_id].add(r.item_id)

    rng = substream(seed, "split")
    train_pos, test_pos = [], []
    excluded = 0
    for u in range(num_users):
        items = np.array(sorted(per_user[u]), dtype=np.int64)
        if len(items) == 0:
            excluded += 1
            train_pos.append(np.array([], dtype=np.int64))
            test_pos.append(np.array([], dtype=np.int64))
            continue
        perm = rng.permutation(items)
        n_train = min(len(items), max(1, int(len(items) * split_ratio + 0.5)))
        train_pos.append(np.sort(perm[:n_train]))
        test_pos.append(np.sort(perm[n_train:]))

    # drop test items that never occur in any user's training split
    seen = np.zeros(num_items, dtype=bool)
    for items in train_pos:
        seen[items] = True
    dropped = 0
    for u in range(num_users):
        keep = seen[test_pos[u]]
        dropped += int((~keep).sum())
        test_pos[u] = test_pos[u][keep]

    return InteractionDataset(
        num_users=num_users,
        num_items=num_items,
        train_pos=tuple(train_pos),
        test_pos=tuple(test_pos),
        dropped_unseen_test=dropped,
        excluded_users=excluded,
    )


@dataclass
class PopularityProfile:
    """Per-item training interaction counts and the hot/cold partition."""

    pop: np.ndarray
    pop_max: int
    hot_set: frozenset
    hot_quantile: float
    hot_mask: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.hot_mask is None:
            mask = np.zeros(len(self.pop), dtype=bool)
            mask[sorted(self.hot_set)] = True
            self.hot_mask = mask
        self.pop.flags.writeable = False
        self.hot_mask.flags.writeable = False


def popularity_profile(dataset, hot_quantile):
    """Compute training-split popularity and the hot set.

    The hot set is the top hot_quantile of items *with at least one training
    interaction*, ranked by count with ties broken by ascending item index;
    |hot_set| = ceil(hot_quantile * #{i : pop_i > 0}).
    """
    if not 0.0 < hot_quantile < 1.0:
        raise ConfigError(f"hot_quantile must be in (0,1), got {hot_quantile}")
    if dataset.n_train_total == 0:
        raise EmptyDatasetError("dataset has no training interactions")

    _, items = dataset.train_pairs
    pop = np.bincount(items, minlength=dataset.num_items).astype(np.int64)
    positive = np.flatnonzero(pop > 0)
    n_hot = int(math.ceil(hot_quantile * len(positive)))
    # sort by (-pop, index); lexsort keys are applied last-key-primary
    order = positive[np.lexsort((positive, -pop[positive]))]
    hot = frozenset(int(i) for i in order[:n_hot])
    return PopularityProfile(
        pop=pop,
        pop_max=int(pop.max()),
        hot_set=hot,
        hot_quantile=hot_quantile,
    )


def export_split(dataset, path):
    """Write the split as CSV "user,item,split" (split in {train,test})."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("user,item,split\n")
        for u in range(dataset.num_users):
            for i in dataset.train_pos[u]:
                fh.write(f"{u},{int(i)},train\n")
            for i in dataset.test_pos[u]:
                fh.write(f"{u},{int(i)},test\n")


def import_split(path, num_users=None, num_items=None):
    """Read a split CSV written by export_split back into an InteractionDataset.

    The file is taken as-is (no re-splitting, no unseen-item drop); invariants
    (disjoint train/test, at least one training positive per present user) are
    validated.
    """
    train = {}
    test = {}
    max_u = -1
    max_i = -1
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != "user,item,split":
            raise ParseError(path, 1, f"expected header 'user,item,split', got {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3 or parts[2] not in ("train", "test"):
                raise ParseError(path, lineno, f"bad split row {line!r}")
            try:
                u, i = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc)) from None
            bucket = train if parts[2] == "train" else test
            bucket.setdefault(u, set())
            if i in bucket[u]:
                raise ParseError(path, lineno, f"duplicate row for user {u} item {i}")
            bucket[u].add(i)
            max_u = max(max_u, u)
            max_i = max(max_i, i)

    if max_u < 0:
        raise EmptyDatasetError(f"{path}: no split rows")
    num_users = num_users if num_users is not None else max_u + 1
    num_items = num_items if num_items is not None else max_i + 1
    if max_u >= num_users or max_i >= num_items:
        raise ConfigError(
            f"split references user {max_u}/item {max_i} outside "
            f"({num_users} users, {num_items} items)"
        )

    train_pos, test_pos = [], []
    for u in range(num_users):
        tr = np.array(sorted(train.get(u, ())), dtype=np.int64)
        te = np.array(sorted(test.get(u, ())), dtype=np.int64)
        if len(np.intersect1d(tr, te)) > 0:
            raise ParseError(path, 0, f"user {u} has overlapping train/test items")
        if len(te) > 0 and len(tr) == 0:
            raise ParseError(path, 0, f"user {u} has test rows but no train rows")
        train_pos.append(tr)
        test_pos.append(te)
    return InteractionDataset(
        num_users=num_users,
        num_items=num_items,
        train_pos=tuple(train_pos),
        test_pos=tuple(test_pos),
    )
