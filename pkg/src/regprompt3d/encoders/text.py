"""Toy word-level vocabulary and the sos/words/class/eos token layout."""

from __future__ import annotations

from dataclasses import dataclass

from ..data.descriptions import candidate_pool, tokenize

SOS, EOS, UNK = "<sos>", "<eos>", "<unk>"


@dataclass(frozen=True)
class TokenSequence:
    """Ids laid out as ``[sos, t_1..t_v, t_c, eos]`` (length ``3 + v``)."""

    token_ids: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.token_ids)

    @property
    def n_words(self) -> int:
        return len(self.token_ids) - 3


class Vocabulary:
    def __init__(self, words):
        self.words = [SOS, EOS, UNK] + sorted(set(words) - {SOS, EOS, UNK})
        self.index = {w: i for i, w in enumerate(self.words)}

    @classmethod
    def from_classes(cls, class_names) -> "Vocabulary":
        words: set[str] = set()
        for name in class_names:
            words.add(name)
            for desc in candidate_pool(name):
                words.update(tokenize(desc))
        return cls(words)

    def __len__(self) -> int:
        return len(self.words)

    def id(self, word: str) -> int:
        return self.index.get(word, self.index[UNK])

    def encode(self, description: str, class_name: str) -> TokenSequence:
        """Move the class mention into the ``t_c`` slot right before eos."""
        toks = tokenize(description)
        name = class_name.lower()
        hits = [i for i, t in enumerate(toks) if t == name]
        if len(hits) != 1:
            raise ValueError(f"description must mention {class_name!r} exactly once: {description!r}")
        words = toks[: hits[0]] + toks[hits[0] + 1:]
        ids = [self.index[SOS]] + [self.id(w) for w in words] + [self.id(name), self.index[EOS]]
        return TokenSequence(tuple(ids))
