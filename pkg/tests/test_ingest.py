import json
import re

import numpy as np
import pytest

from relop.ingest import (
    Gazetteer,
    Post,
    US_STATE_CODES,
    Vocabulary,
    build_vocab,
    content_tokens,
    filter_bots,
    filter_relevant,
    infer_state,
    parse_posts,
    tokenize,
)
from relop.pipeline import data_path

GROUP_A = ["trump", "realdonaldtrump", "donaldtrump"]
GROUP_B = ["hillary", "clinton", "hillaryclinton"]


def make_post(text, **kwargs):
    defaults = dict(id="t1", user_id="u1", client="Twitter for iPhone", timestamp=1)
    defaults.update(kwargs)
    return Post(text=text, **defaults)


def record(text="hello world", **kwargs):
    rec = {
        "id": "t1",
        "text": text,
        "user_id": "u1",
        "client": "Twitter for iPhone",
        "geo": None,
        "profile_location": None,
        "ts": 1,
    }
    rec.update(kwargs)
    return json.dumps(rec)


class TestParsePosts:
    def test_empty_stream(self):
        posts, skipped = parse_posts([])
        assert posts == [] and skipped == 0

    def test_truncated_line_skipped(self):
        lines = [record(id=f"t{i}") for i in range(3)] + [record()[:25]]
        posts, skipped = parse_posts(lines)
        assert len(posts) == 3 and skipped == 1

    def test_missing_text_skipped(self):
        rec = json.loads(record())
        del rec["text"]
        posts, skipped = parse_posts([json.dumps(rec)])
        assert posts == [] and skipped == 1

    def test_blank_text_violates_invariant(self):
        posts, skipped = parse_posts([record(text="   ")])
        assert posts == [] and skipped == 1

    def test_fields_round_trip(self):
        posts, _ = parse_posts([record(geo="Austin, TX", profile_location="TX")])
        assert posts[0].geo_field == "Austin, TX"
        assert posts[0].profile_location == "TX"


class TestTokenize:
    def test_mentions_and_urls_are_classified(self):
        tokens = tokenize("Vote NOW http://x.co @bob #maga!")
        kept = content_tokens(tokens)
        assert [(t.surface, t.kind) for t in kept] == [
            ("vote", "word"),
            ("now", "word"),
            ("#maga", "hashtag"),
        ]
        assert {t.kind for t in tokens} == {"word", "hashtag", "mention", "url"}

    def test_empty(self):
        assert tokenize("") == []

    def test_lowercase_merges_hashtags(self):
        tokens = tokenize("#MAGA #maga")
        assert [t.surface for t in tokens] == ["#maga", "#maga"]
        assert all(t.kind == "hashtag" for t in tokens)

    def test_prefix_invariants(self):
        for token in tokenize("(@someone) '#tag', plain-word."):
            if token.kind == "hashtag":
                assert token.surface.startswith("#")
            if token.kind == "mention":
                assert token.surface.startswith("@")

    def test_concatenation_property(self):
        rng = np.random.default_rng(3)
        pieces = [
            "vote now",
            "#maga rally!",
            "beat them, soundly",
            "plain words here",
            "@user hi there",
        ]
        for _ in range(50):
            a, b = (pieces[i] for i in rng.integers(0, len(pieces), 2))
            assert tokenize(a + " " + b) == tokenize(a) + tokenize(b)

    def test_deterministic(self):
        text = "Some #Tweet with @user and http://t.co/xyz mixed in"
        assert tokenize(text) == tokenize(text)


class TestFilterRelevant:
    def test_both_groups_present(self):
        assert filter_relevant([make_post("Hillary will beat Trump")], GROUP_A, GROUP_B)

    def test_one_group_missing(self):
        assert filter_relevant([make_post("trump trump trump")], GROUP_A, GROUP_B) == []

    def test_hashtag_containment(self):
        post = make_post("#nevertrump #imwithher she means clinton")
        assert filter_relevant([post], GROUP_A, GROUP_B) == [post]

    def test_word_boundary_blocks_substrings(self):
        # "trumpet" is not a mention of the candidate
        assert filter_relevant([make_post("a trumpet for hillary")], GROUP_A, GROUP_B) == []

    def test_idempotent(self):
        posts = [make_post(t) for t in ("trump vs clinton", "nothing here", "#trump2016 hillary")]
        once = filter_relevant(posts, GROUP_A, GROUP_B)
        assert filter_relevant(once, GROUP_A, GROUP_B) == once

    def test_against_brute_force_scanner(self):
        """Derived oracle: independent regex scanner over a 100-post fixture."""
        rng = np.random.default_rng(11)
        fillers = ["vote", "rally", "tonight", "#debate", "news", "@cnn", "poll"]
        a_terms = ["trump", "#nevertrump", "@realdonaldtrump"]
        b_terms = ["clinton", "hillary", "#imwithher"]
        posts = []
        for i in range(100):
            words = [fillers[j] for j in rng.integers(0, len(fillers), 5)]
            if rng.random() < 0.6:
                words.append(a_terms[int(rng.integers(3))])
            if rng.random() < 0.6:
                words.append(b_terms[int(rng.integers(3))])
            rng.shuffle(words)
            posts.append(make_post(" ".join(words), id=f"t{i}"))

        def scan(text, keywords):
            hits = set()
            for chunk in text.lower().split():
                for kw in keywords:
                    if chunk.startswith(("#", "@")):
                        if kw in chunk:
                            hits.add(kw)
                    elif re.fullmatch(re.escape(kw), chunk.strip(".,!?:;'\"()")):
                        hits.add(kw)
            return hits

        expected = [
            p for p in posts if scan(p.text, GROUP_A) and scan(p.text, GROUP_B)
        ]
        assert filter_relevant(posts, GROUP_A, GROUP_B) == expected


class TestFilterBots:
    def test_official_retained(self):
        posts, _ = filter_bots([make_post("x", client="Twitter for iPhone")], {"Twitter for iPhone"})
        assert len(posts) == 1

    def test_bot_dropped(self):
        posts, _ = filter_bots([make_post("x", client="SuperBot3000")], {"Twitter for iPhone"})
        assert posts == []

    def test_retained_fraction(self):
        # mirrors the reported ~90% official-client share
        posts = [make_post("x", id=f"t{i}") for i in range(9)]
        posts.append(make_post("x", id="t9", client="SuperBot3000"))
        kept, fraction = filter_bots(posts, {"Twitter for iPhone"})
        assert len(kept) == 9
        assert fraction == pytest.approx(0.9)

    def test_idempotent(self):
        posts = [make_post("x", id="a"), make_post("x", id="b", client="bot")]
        once, _ = filter_bots(posts, {"Twitter for iPhone"})
        again, fraction = filter_bots(once, {"Twitter for iPhone"})
        assert again == once and fraction == 1.0


@pytest.fixture(scope="module")
def gazetteer():
    return Gazetteer.from_csv(data_path("gazetteer.csv"))


class TestInferState:
    def test_geo_field_direct(self, gazetteer):
        assert infer_state(make_post("x", geo_field="Charlotte, NC"), gazetteer) == "NC"

    def test_priority_order(self, gazetteer):
        post = make_post("in texas", profile_location="NYC")
        assert infer_state(post, gazetteer) == "NY"

    def test_unresolvable(self, gazetteer):
        post = make_post("nothing locational", geo_field="Mars Base", profile_location="??")
        assert infer_state(post, gazetteer) is None

    def test_text_mention(self, gazetteer):
        assert infer_state(make_post("campaigning in texas today"), gazetteer) == "TX"

    def test_never_outside_closed_set(self, gazetteer):
        rng = np.random.default_rng(4)
        names = list(gazetteer.entries) + ["nowhere", "atlantis"]
        for _ in range(200):
            geo = names[int(rng.integers(len(names)))]
            code = infer_state(make_post("words only", geo_field=geo), gazetteer)
            assert code is None or code in US_STATE_CODES

    def test_rejects_unknown_codes(self):
        with pytest.raises(ValueError):
            Gazetteer({"atlantis": "ZZ"})


class TestVocabulary:
    def test_counts(self):
        vocab = build_vocab([["a", "a", "b"]], min_count=1)
        assert vocab.counts[vocab.index["a"]] == 2
        assert vocab.counts[vocab.index["b"]] == 1

    def test_min_count_cutoff(self):
        vocab = build_vocab([["a", "a", "b"]], min_count=2)
        assert "a" in vocab and "b" not in vocab
        assert vocab.lookup("b") == Vocabulary.UNK

    def test_empty_corpus_errors(self):
        with pytest.raises(ValueError):
            build_vocab([], min_count=1)

    def test_excluded_tokens_never_enter(self):
        vocab = build_vocab([["#maga", "word"] * 5], min_count=1, exclude={"#maga"})
        assert "#maga" not in vocab

    def test_index_is_dense_bijection(self):
        rng = np.random.default_rng(0)
        corpus = [[f"w{rng.integers(50)}" for _ in range(10)] for _ in range(200)]
        vocab = build_vocab(corpus, min_count=2)
        indices = sorted(vocab.index.values())
        assert indices == list(range(len(vocab)))

    def test_deterministic_across_runs(self):
        """Derived check: byte-for-byte identical on a 1000-tweet fixture."""

        def build():
            rng = np.random.default_rng(42)
            corpus = [
                [f"tok{rng.integers(300)}" for _ in range(12)] for _ in range(1000)
            ]
            vocab = build_vocab(corpus, min_count=3)
            return json.dumps(vocab.index).encode()

        assert build() == build()
