"""Similarity metrics over parsed records.

All four metrics live on [0, 1] and compare a predicted record against
its reference through the FlatView: exact match works per leaf path,
while BLEU, ROUGE, and the semantic score consume the rendered
"path: value" text. One tokenizer serves every token-based metric:
lowercase the text and take maximal runs of letters and digits.

BLEU-4 uses uniform quarter weights, brevity penalty exp(1 - r/h) when
the hypothesis is shorter than the reference, and Chen and Cherry (2014)
smoothing method 4 for zero-count orders. The exact recurrence, pinned
by golden tests: walk n = 1..4 keeping a counter k that starts at 1;
whenever order n has zero matches (and the hypothesis has more than one
token), replace the match count with ln(h) / (5 * 2^k) where h is the
hypothesis token count, then increment k. Denominators are
max(1, h - n + 1) throughout. A hypothesis of one token or less with a
zero-count order scores 0.0.

ROUGE is the mean of ROUGE-1, ROUGE-2, and ROUGE-L balanced F-measures
over Porter-stemmed tokens. Within each component, two empty n-gram
collections count as perfect agreement (1.0) and exactly one empty
counts as total disagreement (0.0), which keeps the identity law exact
for sequences of a single token.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass

from .llm_gateway import cosine_similarity
from .porter import stem
from .schema import ResumeRecord, flatten

_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)

_SMOOTH_K = 5
_BLEU_MAX_ORDER = 4


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def levenshtein_ratio(a: str, b: str) -> float:
    """1 - edit_distance(a, b) / max(len(a), len(b)); 1.0 for two empties."""
    if a == b:
        return 1.0
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - _edit_distance(a, b) / longest


def _edit_distance(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost))
        previous = current
    return previous[len(b)]


def exact_match(reference: ResumeRecord, predicted: ResumeRecord) -> float:
    """Mean per-path Levenshtein ratio over the union of leaf paths.

    A path present on only one side is compared against the empty
    string, so omissions and inventions both cost score instead of
    being skipped.
    """
    ref = flatten(reference).as_dict()
    pred = flatten(predicted).as_dict()
    paths = list(ref.keys()) + [p for p in pred if p not in ref]
    return sum(levenshtein_ratio(ref.get(p, ""), pred.get(p, "")) for p in paths) / len(paths)


def semantic_similarity_text(reference_text: str, predicted_text: str, provider) -> float:
    """Clamped cosine of the provider's embeddings of two texts."""
    cos = cosine_similarity(provider.embed(reference_text), provider.embed(predicted_text))
    return min(1.0, max(0.0, cos))


def semantic_f1(reference: ResumeRecord, predicted: ResumeRecord, provider) -> float:
    return semantic_similarity_text(
        flatten(reference).render(), flatten(predicted).render(), provider
    )


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _modified_precision(ref: list[str], hyp: list[str], n: int) -> tuple[int, int]:
    """Clipped n-gram matches and the hypothesis n-gram total (min 1)."""
    hyp_grams = _ngrams(hyp, n)
    ref_grams = _ngrams(ref, n)
    matches = sum(min(count, ref_grams[gram]) for gram, count in hyp_grams.items())
    return matches, max(1, len(hyp) - n + 1)


def bleu4_smoothed(reference: list[str], hypothesis: list[str]) -> float:
    """Sentence BLEU-4 with method-4 smoothing (see module doc)."""
    h, r = len(hypothesis), len(reference)
    if h == 0:
        return 0.0
    log_sum = 0.0
    smooth_exponent = 1
    for n in range(1, _BLEU_MAX_ORDER + 1):
        matches, total = _modified_precision(reference, hypothesis, n)
        numerator = float(matches)
        if matches == 0:
            if h <= 1:
                return 0.0
            numerator = math.log(h) / (_SMOOTH_K * 2**smooth_exponent)
            smooth_exponent += 1
        log_sum += math.log(numerator / total)
    brevity = math.exp(1.0 - r / h) if h < r else 1.0
    return brevity * math.exp(log_sum / _BLEU_MAX_ORDER)


def _f_measure(ref_total: int, hyp_total: int, matches: float) -> float:
    if ref_total == 0 and hyp_total == 0:
        return 1.0
    if ref_total == 0 or hyp_total == 0 or matches == 0:
        return 0.0
    precision = matches / hyp_total
    recall = matches / ref_total
    return 2.0 * precision * recall / (precision + recall)


def _rouge_n(ref: list[str], hyp: list[str], n: int) -> float:
    ref_grams = _ngrams(ref, n)
    hyp_grams = _ngrams(hyp, n)
    matches = sum(min(count, ref_grams[gram]) for gram, count in hyp_grams.items())
    return _f_measure(sum(ref_grams.values()), sum(hyp_grams.values()), matches)


def _lcs_length(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for x in a:
        current = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[j - 1]))
        previous = current
    return previous[len(b)]


def rouge_combined(reference: list[str], hypothesis: list[str]) -> float:
    """Mean of ROUGE-1, ROUGE-2, and ROUGE-L F-measures, Porter-stemmed."""
    ref = [stem(t) for t in reference]
    hyp = [stem(t) for t in hypothesis]
    if not ref and not hyp:
        return 1.0
    if not ref or not hyp:
        return 0.0
    rouge_l = _f_measure(len(ref), len(hyp), float(_lcs_length(ref, hyp)))
    return (_rouge_n(ref, hyp, 1) + _rouge_n(ref, hyp, 2) + rouge_l) / 3.0


def overall_similarity(em: float, f1_sem: float, bleu: float, rouge: float) -> float:
    return (em + f1_sem + bleu + rouge) / 4.0


@dataclass(frozen=True)
class SampleScore:
    em: float
    f1_sem: float
    bleu: float
    rouge: float
    overall: float

    def __post_init__(self):
        for name in ("em", "f1_sem", "bleu", "rouge", "overall"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"{name} out of range: {value}")

    @classmethod
    def zero(cls) -> "SampleScore":
        return cls(em=0.0, f1_sem=0.0, bleu=0.0, rouge=0.0, overall=0.0)


def score_sample(reference: ResumeRecord, predicted: ResumeRecord, provider) -> SampleScore:
    """All four metrics plus their unweighted mean for one sample."""
    ref_view = flatten(reference)
    pred_view = flatten(predicted)
    ref_tokens = tokenize(ref_view.render())
    pred_tokens = tokenize(pred_view.render())
    em = exact_match(reference, predicted)
    f1_sem = semantic_similarity_text(ref_view.render(), pred_view.render(), provider)
    bleu = bleu4_smoothed(ref_tokens, pred_tokens)
    rouge = rouge_combined(ref_tokens, pred_tokens)
    return SampleScore(
        em=em,
        f1_sem=f1_sem,
        bleu=bleu,
        rouge=rouge,
        overall=overall_similarity(em, f1_sem, bleu, rouge),
    )
