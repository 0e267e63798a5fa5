"""Exact invariants of free group endomorphisms and their mapping tori."""

from endotorus.words import Endomorphism, CyclicWord, reduce_word, parse_word, show_word

__all__ = ["Endomorphism", "CyclicWord", "reduce_word", "parse_word", "show_word"]
