"""Post ingestion: parsing, relevance/bot filtering, tokenization, state inference."""

from __future__ import annotations

import csv
import json
import logging
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional

logger = logging.getLogger("relop")

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

_URL_RE = re.compile(r"^(https?://|www\.)", re.IGNORECASE)
_EDGE_PUNCT_RE = re.compile(r"^\W+|\W+$", re.UNICODE)
_LEAD_PUNCT_RE = re.compile(r"^[^\w#@]+", re.UNICODE)
_TRAIL_PUNCT_RE = re.compile(r"[^\w]+$", re.UNICODE)


@dataclass(frozen=True)
class Post:
    id: str
    text: str
    user_id: str
    client: str
    geo_field: Optional[str] = None
    profile_location: Optional[str] = None
    timestamp: int = 0


@dataclass(frozen=True)
class Token:
    surface: str
    kind: str  # word | hashtag | mention | url


def parse_posts(lines: Iterable[str]) -> tuple[list[Post], int]:
    """Parse JSON-Lines post records.

    Each line must carry ``id``, ``text``, ``user_id``, ``client`` and ``ts``;
    ``geo`` and ``profile_location`` may be null. Malformed lines are counted
    and skipped with a warning.

    Returns
    -------
    (posts, skipped) : list of valid posts and the number of skipped lines.
    """
    posts: list[Post] = []
    skipped = 0
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
            post = Post(
                id=str(rec["id"]),
                text=str(rec["text"]),
                user_id=str(rec["user_id"]),
                client=str(rec["client"]),
                geo_field=rec.get("geo"),
                profile_location=rec.get("profile_location"),
                timestamp=int(rec["ts"]),
            )
            if not post.id or not post.text.strip():
                raise ValueError("empty id or text")
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            logger.warning("skipping malformed record on line %d: %s", lineno, exc)
            skipped += 1
            continue
        posts.append(post)
    return posts, skipped


def tokenize(text: str) -> list[Token]:
    """Split a post into lowercase tokens classified as word/hashtag/mention/url.

    Whitespace split; URLs detected by ``http(s)://`` or ``www.`` prefix;
    '#'/'@' prefixes are preserved while other edge punctuation is stripped.
    """
    tokens: list[Token] = []
    for chunk in text.split():
        if _URL_RE.match(chunk):
            tokens.append(Token(chunk.lower(), "url"))
            continue
        chunk = _LEAD_PUNCT_RE.sub("", chunk)
        if not chunk:
            continue
        if chunk[0] in "#@":
            surface = _TRAIL_PUNCT_RE.sub("", chunk).lower()
            kind = "hashtag" if surface.startswith("#") else "mention"
            if len(surface) > 1:
                tokens.append(Token(surface, kind))
        else:
            surface = _EDGE_PUNCT_RE.sub("", chunk).lower()
            if surface:
                tokens.append(Token(surface, "word"))
    return tokens


def content_tokens(tokens: Iterable[Token]) -> list[Token]:
    """Drop mention and url tokens, keeping words and hashtags."""
    return [t for t in tokens if t.kind in ("word", "hashtag")]


def _matches_keyword(token: Token, keyword: str) -> bool:
    # words must equal the keyword; hashtags/mentions only need to contain it
    if token.kind == "word":
        return token.surface == keyword
    if token.kind in ("hashtag", "mention"):
        return keyword in token.surface
    return False


def filter_relevant(
    posts: Iterable[Post],
    group_a_keywords: list[str],
    group_b_keywords: list[str],
) -> list[Post]:
    """Keep posts mentioning at least one keyword from each group.

    Matching is at token boundaries: a word token must equal the keyword,
    while hashtag/mention tokens match on containment.
    """
    if not group_a_keywords or not group_b_keywords:
        raise ValueError("keyword groups must be nonempty")
    kept = []
    for post in posts:
        tokens = tokenize(post.text)
        hit_a = any(_matches_keyword(t, kw) for t in tokens for kw in group_a_keywords)
        hit_b = any(_matches_keyword(t, kw) for t in tokens for kw in group_b_keywords)
        if hit_a and hit_b:
            kept.append(post)
    return kept


def filter_bots(posts: Iterable[Post], official_clients: set[str]) -> tuple[list[Post], float]:
    """Keep posts sent from an official client; returns (posts, retained fraction)."""
    if not official_clients:
        raise ValueError("official_clients must be nonempty")
    posts = list(posts)
    kept = [p for p in posts if p.client in official_clients]
    fraction = len(kept) / len(posts) if posts else 0.0
    return kept, fraction


class Gazetteer:
    """Maps place names and abbreviations to two-letter region codes.

    Loaded from a ``name,state_code`` CSV with a header row. All codes must
    belong to the closed 51-value set (50 states + DC).
    """

    def __init__(self, entries: dict[str, str]):
        codes = set(entries.values())
        unknown = codes - US_STATE_CODES
        if unknown:
            raise ValueError(f"gazetteer contains unknown region codes: {sorted(unknown)}")
        self.entries = entries
        self.max_words = max((name.count(" ") + 1 for name in entries), default=1)

    @classmethod
    def from_csv(cls, path) -> "Gazetteer":
        entries: dict[str, str] = {}
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                entries[_normalize_place(row["name"])] = row["state_code"].strip().upper()
        return cls(entries)

    def lookup(self, name: str) -> Optional[str]:
        return self.entries.get(_normalize_place(name))


def _normalize_place(name: str) -> str:
    name = re.sub(r"[^\w\s]", " ", name.lower())
    return " ".join(name.split())


def _scan_words(words: list[str], gazetteer: Gazetteer, min_len: int = 3) -> Optional[str]:
    # longest n-gram wins at each position, leftmost position wins overall;
    # entries shorter than min_len (bare region codes: "in", "or", "me", ...)
    # collide with everyday words, so free-text scans skip them
    for start in range(len(words)):
        for n in range(min(gazetteer.max_words, len(words) - start), 0, -1):
            name = " ".join(words[start : start + n])
            if len(name) < min_len:
                continue
            code = gazetteer.entries.get(name)
            if code is not None:
                return code
    return None


def _resolve_field(field: str, gazetteer: Gazetteer) -> Optional[str]:
    code = gazetteer.lookup(field)
    if code is not None:
        return code
    segments = [seg.strip() for seg in field.split(",") if seg.strip()]
    for seg in reversed(segments):  # region usually trails, as in "Charlotte, NC"
        code = gazetteer.lookup(seg)
        if code is not None:
            return code
    return _scan_words(_normalize_place(field).split(), gazetteer, min_len=1)


def infer_state(post: Post, gazetteer: Gazetteer) -> Optional[str]:
    """Infer a region code from the post, trying geo tag, then profile, then text."""
    if post.geo_field:
        code = _resolve_field(post.geo_field, gazetteer)
        if code is not None:
            return code
    if post.profile_location:
        code = _resolve_field(post.profile_location, gazetteer)
        if code is not None:
            return code
    words = [t.surface for t in tokenize(post.text) if t.kind == "word"]
    return _scan_words(words, gazetteer)


class Vocabulary:
    """Dense token index with reserved padding (0) and unknown (1) slots.

    Retained tokens are indexed by descending count with lexicographic
    tiebreak, which makes the index a pure function of the corpus.
    """

    PAD = 0
    UNK = 1

    def __init__(self, counts: dict[str, int]):
        ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        self.index = {PAD_TOKEN: self.PAD, UNK_TOKEN: self.UNK}
        self.counts = [0, 0]
        for token, count in ordered:
            self.index[token] = len(self.index)
            self.counts.append(count)
        self.tokens = list(self.index)

    def __len__(self) -> int:
        return len(self.index)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def lookup(self, token: str) -> int:
        return self.index.get(token, self.UNK)


def build_vocab(
    corpus: Iterable[list[str]],
    min_count: int = 5,
    exclude: Optional[set[str]] = None,
) -> Vocabulary:
    """Build a vocabulary from an iterable of token-string lists.

    Tokens in ``exclude`` (e.g. opinion-labeled hashtags) never enter the
    vocabulary; tokens below ``min_count`` fall back to the unknown index.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    exclude = exclude or set()
    counts: Counter[str] = Counter()
    n_docs = 0
    for tokens in corpus:
        n_docs += 1
        counts.update(t for t in tokens if t not in exclude)
    if n_docs == 0:
        raise ValueError("empty corpus")
    retained = {t: c for t, c in counts.items() if c >= min_count}
    return Vocabulary(retained)


US_STATE_CODES = frozenset(
    {
        "AL", "AK", "AZ", "AR", "CA", "CO", "CT", "DE", "DC", "FL", "GA", "HI",
        "ID", "IL", "IN", "IA", "KS", "KY", "LA", "ME", "MD", "MA", "MI", "MN",
        "MS", "MO", "MT", "NE", "NV", "NH", "NJ", "NM", "NY", "NC", "ND", "OH",
        "OK", "OR", "PA", "RI", "SC", "SD", "TN", "TX", "UT", "VT", "VA", "WA",
        "WV", "WI", "WY",
    }
)
