"""Within-document coreference.

Rule-based candidate detection, a two-layer feed-forward mention-pair scorer
and greedy best-first antecedent linking.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .container import load_container, save_container
from .corpus import Document, Mention
from .ontology import TypePath

logger = logging.getLogger(__name__)

NAMED, NOMINAL, PRONOMINAL = "named", "nominal", "pronominal"
KINDS = (NAMED, NOMINAL, PRONOMINAL)

# Words that end a determiner-led noun run.
STOPWORDS = frozenset("""
    of in on at to for from by with about into over after before during near under between
    and or but nor so yet if that which who whom whose what when where while as than
    is are was were be been being am has have had do does did will would shall should can could may might must
    said says say not also very just then there here
""".split())

# surface -> (gender, number); gender in {masc, fem, neut, anim}, number in {sg, pl}
PRONOUN_FEATURES = {
    **dict.fromkeys(("he", "him", "his", "himself"), ("masc", "sg")),
    **dict.fromkeys(("she", "her", "hers", "herself"), ("fem", "sg")),
    **dict.fromkeys(("it", "its", "itself"), ("neut", "sg")),
    **dict.fromkeys(("they", "them", "their", "theirs", "themselves"), (None, "pl")),
    **dict.fromkeys(("we", "us", "our", "ours", "ourselves"), ("anim", "pl")),
    **dict.fromkeys(("i", "me", "my", "mine", "myself", "you", "your", "yours", "yourself"), ("anim", "sg")),
}
GENDERED_TITLES = {"mr": "masc", "mr.": "masc", "mrs": "fem", "mrs.": "fem", "ms": "fem", "ms.": "fem",
                   "miss": "fem", "sir": "masc", "lady": "fem"}
ANIMATE_ROOTS = frozenset({"PER"})


def load_lexicon(path: str | Path | None, default: str) -> frozenset[str]:
    """Lowercased surface forms, one per line; ``#`` lines are comments.
    ``None`` loads the packaged default.
    """
    if path is None:
        text = resources.files("rufes.data").joinpath(default).read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return frozenset(line.strip().lower() for line in text.splitlines()
                     if line.strip() and not line.lstrip().startswith("#"))


def default_pronouns() -> frozenset[str]:
    return load_lexicon(None, "pronouns.txt")


def default_determiners() -> frozenset[str]:
    return load_lexicon(None, "determiners.txt")


@dataclass(frozen=True)
class CandidateMention:
    start: int
    end: int
    text: str
    kind: str
    head_token: int
    token_start: int
    token_end: int
    segment: int
    tokens: tuple[str, ...]
    type_path: TypePath | None = None
    tagged: bool = False

    @property
    def head(self) -> str:
        return self.tokens[self.head_token - self.token_start]


@dataclass(frozen=True)
class EntityCluster:
    entity_id: str
    spans: tuple[tuple[int, int], ...]
    members: tuple[int, ...]


# --------------------------------------------------------------------------- detection

def _flat_tokens(doc: Document):
    return [(s, tok) for s, seg in enumerate(doc.segments) for tok in seg.tokens]


def detect_candidates(doc: Document, tagged: Sequence[Mention], pronouns: frozenset[str] | None = None,
                      determiners: frozenset[str] | None = None) -> list[CandidateMention]:
    """Tagged mentions, lexicon pronouns, determiner-led noun runs and
    capitalized runs, deduplicated by span.

    Rule-found spans overlapping a tagged mention are dropped in its favour.
    """
    pronouns = default_pronouns() if pronouns is None else pronouns
    determiners = default_determiners() if determiners is None else determiners
    flat = _flat_tokens(doc)
    if not flat:
        return []
    start_at = {tok.start: i for i, (_, tok) in enumerate(flat)}
    end_at = {tok.end: i for i, (_, tok) in enumerate(flat)}

    def make(first: int, last: int, kind: str, type_path=None, tagged_=False) -> CandidateMention:
        seg = flat[first][0]
        texts = tuple(tok.text for _, tok in flat[first : last + 1])
        head = last
        if flat[head][1].text.lower() in pronouns:
            kind = PRONOMINAL
        start, end = flat[first][1].start, flat[last][1].end
        return CandidateMention(start, end, doc.text_span(start, end), kind, head, first, last, seg,
                                texts, type_path, tagged_)

    found: dict[tuple[int, int], CandidateMention] = {}
    for m in tagged:
        if m.doc_id != doc.doc_id:
            continue
        first = start_at.get(m.start)
        last = end_at.get(m.end)
        if first is None or last is None:
            covering = [i for i, (_, tok) in enumerate(flat) if tok.start <= m.end and m.start <= tok.end]
            if not covering:
                logger.warning("tagged mention %s:%d-%d touches no token", m.doc_id, m.start, m.end)
                continue
            first, last = covering[0], covering[-1]
        kind = NOMINAL if m.mention_class == "NOM" else NAMED
        cand = make(first, last, kind, m.type_path, True)
        found.setdefault((cand.start, cand.end), cand)
    tagged_spans = [(c.token_start, c.token_end) for c in found.values()]

    def free(first: int, last: int) -> bool:
        return all(last < a or first > b for a, b in tagged_spans)

    rules: list[tuple[int, int, str]] = []
    n = len(flat)
    for i, (seg, tok) in enumerate(flat):
        low = tok.text.lower()
        if low in pronouns:
            rules.append((i, i, PRONOMINAL))
        elif low in determiners:
            j = i + 1
            while (j < n and j - i <= 4 and flat[j][0] == seg and flat[j][1].text.isalpha()
                   and flat[j][1].text.lower() not in STOPWORDS | pronouns | determiners):
                j += 1
            if j > i + 1:
                rules.append((i, j - 1, NOMINAL))
    i = 0
    while i < n:
        seg, tok = flat[i]
        if tok.text[:1].isupper() and tok.text.isalpha() and tok.text.lower() not in pronouns | determiners | STOPWORDS:
            j = i
            while j + 1 < n and flat[j + 1][0] == seg and flat[j + 1][1].text[:1].isupper() and flat[j + 1][1].text.isalpha():
                j += 1
            sentence_initial = i == 0 or flat[i - 1][0] != seg
            if j > i or not sentence_initial:
                rules.append((i, j, NAMED))
            i = j + 1
        else:
            i += 1

    for first, last, kind in rules:
        if free(first, last):
            cand = make(first, last, kind)
            found.setdefault((cand.start, cand.end), cand)
    return sorted(found.values(), key=lambda c: (c.start, c.end))


# --------------------------------------------------------------------------- features

FEATURE_NAMES = (
    "exact_match", "head_match", "log_token_distance",
    *(f"kinds_{a}_{b}" for a in KINDS for b in KINDS),
    "same_type", "type_conflict", "gender_agree", "number_agree",
    "same_segment", "log_segment_distance", "token_overlap",
)
NUM_FEATURES = len(FEATURE_NAMES)


def _gender(c: CandidateMention) -> str | None:
    if c.kind == PRONOMINAL:
        return PRONOUN_FEATURES.get(c.head.lower(), (None, None))[0]
    for tok in c.tokens:
        if tok.lower() in GENDERED_TITLES:
            return GENDERED_TITLES[tok.lower()]
    if c.type_path is not None:
        return "anim" if c.type_path.levels[0] in ANIMATE_ROOTS else "neut"
    return None


def _number(c: CandidateMention) -> str | None:
    if c.kind == PRONOMINAL:
        return PRONOUN_FEATURES.get(c.head.lower(), (None, None))[1]
    if c.kind == NOMINAL:
        head = c.head.lower()
        return "pl" if head.endswith("s") and not head.endswith("ss") else "sg"
    return "sg"


def _gender_compatible(a: str | None, b: str | None) -> bool:
    if a is None or b is None or a == b:
        return True
    if "anim" in (a, b):
        return "neut" not in (a, b)
    return False


def pair_features(a: CandidateMention, b: CandidateMention) -> np.ndarray:
    """Fixed-length feature vector for antecedent ``a`` and anaphor ``b``."""
    x = np.zeros(NUM_FEATURES)
    content = a.kind != PRONOMINAL and b.kind != PRONOMINAL
    x[0] = float(content and a.text.lower() == b.text.lower())
    x[1] = float(content and a.head.lower() == b.head.lower())
    x[2] = math.log1p(max(b.token_start - a.token_end, 0))
    x[3 + 3 * KINDS.index(a.kind) + KINDS.index(b.kind)] = 1.0
    k = 3 + 9
    typed = a.type_path is not None and b.type_path is not None
    x[k] = float(typed and a.type_path == b.type_path)
    x[k + 1] = float(typed and a.type_path.levels[0] != b.type_path.levels[0])
    x[k + 2] = float(_gender_compatible(_gender(a), _gender(b)))
    na, nb = _number(a), _number(b)
    x[k + 3] = float(na is None or nb is None or na == nb)
    x[k + 4] = float(a.segment == b.segment)
    x[k + 5] = math.log1p(abs(b.segment - a.segment))
    if content:
        ta, tb = {t.lower() for t in a.tokens}, {t.lower() for t in b.tokens}
        x[k + 6] = len(ta & tb) / len(ta | tb)
    return x


# --------------------------------------------------------------------------- scorer

@dataclass(frozen=True)
class PairScorerConfig:
    hidden: int = 16
    epochs: int = 300
    learning_rate: float = 0.02
    l2: float = 1e-4
    seed: int = 0
    max_antecedents: int = 50


@dataclass
class PairScorerParams:
    w1: np.ndarray  # (features, hidden)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden,)
    b2: float
    loss_history: list[float] = field(default_factory=list, compare=False, repr=False)

    @classmethod
    def zeros(cls, hidden: int = 16) -> PairScorerParams:
        return cls(np.zeros((NUM_FEATURES, hidden)), np.zeros(hidden), np.zeros(hidden), 0.0)

    def copy(self) -> PairScorerParams:
        return PairScorerParams(self.w1.copy(), self.b1.copy(), self.w2.copy(), float(self.b2))

    def logits(self, features: np.ndarray) -> np.ndarray:
        return np.tanh(features @ self.w1 + self.b1) @ self.w2 + self.b2


def pair_score(a: CandidateMention, b: CandidateMention, params: PairScorerParams) -> float:
    """Coreference logit for antecedent ``a`` and later mention ``b``; higher is more coreferent."""
    return float(params.logits(pair_features(a, b)[None])[0])


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def train_pair_scorer(pairs: Sequence[tuple[CandidateMention, CandidateMention, bool]],
                      cfg: PairScorerConfig = PairScorerConfig()) -> PairScorerParams:
    """Full-batch Adam on the mean logistic loss (+ L2 on weights)."""
    labels = np.array([float(y) for _, _, y in pairs])
    if labels.size == 0 or labels.min() == labels.max():
        raise ValueError("pair scorer training needs at least one positive and one negative pair")
    feats = np.stack([pair_features(a, b) for a, b, _ in pairs])
    return fit_pair_scorer(feats, labels, cfg)


def fit_pair_scorer(feats: np.ndarray, labels: np.ndarray, cfg: PairScorerConfig,
                    init: PairScorerParams | None = None) -> PairScorerParams:
    rng = np.random.default_rng(cfg.seed)
    if init is None:
        bound = math.sqrt(6.0 / (NUM_FEATURES + cfg.hidden))
        params = PairScorerParams(rng.uniform(-bound, bound, (NUM_FEATURES, cfg.hidden)), np.zeros(cfg.hidden),
                                  rng.uniform(-bound, bound, cfg.hidden), 0.0)
    else:
        params = init.copy()
    names = ("w1", "b1", "w2", "b2")
    m = {k: np.zeros_like(np.asarray(getattr(params, k), dtype=float)) for k in names}
    v = {k: np.zeros_like(m[k]) for k in names}
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    n = len(labels)
    params.loss_history.clear()
    for step in range(1, cfg.epochs + 1):
        hidden = np.tanh(feats @ params.w1 + params.b1)
        logits = hidden @ params.w2 + params.b2
        # log(1 + exp(-z)) for y=1, log(1 + exp(z)) for y=0
        loss = np.mean(np.logaddexp(0.0, logits) - labels * logits)
        loss += 0.5 * cfg.l2 * (np.sum(params.w1 ** 2) + np.sum(params.w2 ** 2))
        params.loss_history.append(float(loss))
        d_logits = (_sigmoid(logits) - labels) / n
        grads = {
            "w2": hidden.T @ d_logits + cfg.l2 * params.w2,
            "b2": np.asarray(d_logits.sum()),
        }
        d_hidden = np.outer(d_logits, params.w2) * (1.0 - hidden ** 2)
        grads["w1"] = feats.T @ d_hidden + cfg.l2 * params.w1
        grads["b1"] = d_hidden.sum(axis=0)
        for k in names:
            m[k] = beta1 * m[k] + (1 - beta1) * grads[k]
            v[k] = beta2 * v[k] + (1 - beta2) * grads[k] ** 2
            update = cfg.learning_rate * (m[k] / (1 - beta1 ** step)) / (np.sqrt(v[k] / (1 - beta2 ** step)) + eps)
            if k == "b2":
                params.b2 = float(params.b2 - update)
            else:
                setattr(params, k, getattr(params, k) - update)
    return params


def training_pairs(doc: Document, gold: Sequence[Mention], max_antecedents: int = 50,
                   pronouns: frozenset[str] | None = None, determiners: frozenset[str] | None = None):
    """Labeled (antecedent, anaphor, coreferent?) pairs among the gold mentions of ``doc``."""
    entity = {(m.start, m.end): m.entity_id for m in gold if m.doc_id == doc.doc_id}
    cands = [c for c in detect_candidates(doc, gold, pronouns, determiners) if c.tagged]
    pairs = []
    for i, b in enumerate(cands):
        eb = entity.get((b.start, b.end))
        for a in cands[max(0, i - max_antecedents) : i]:
            ea = entity.get((a.start, a.end))
            pairs.append((a, b, ea is not None and ea == eb))
    return pairs


# --------------------------------------------------------------------------- clustering

def logit_threshold(threshold: float) -> float:
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie strictly between 0 and 1")
    return math.log(threshold / (1.0 - threshold))


def greedy_antecedents(scores: np.ndarray, cutoff: float, max_antecedents: int | None = None) -> list[int | None]:
    """Best-first antecedent per mention from ``scores[j, i]`` (antecedent j < i).

    A link needs a score strictly above ``cutoff``; ties prefer the nearest antecedent.
    """
    n = scores.shape[0]
    links: list[int | None] = []
    for i in range(n):
        lo = 0 if max_antecedents is None else max(0, i - max_antecedents)
        best, best_j = cutoff, None
        for j in range(i - 1, lo - 1, -1):
            if scores[j, i] > best:
                best, best_j = scores[j, i], j
        links.append(best_j)
    return links


def clusters_from_links(links: Sequence[int | None]) -> list[list[int]]:
    """Transitive closure of antecedent links, clusters in first-mention order."""
    root = list(range(len(links)))
    for i, j in enumerate(links):
        if j is not None:
            root[i] = root[j]
    groups: dict[int, list[int]] = {}
    for i, r in enumerate(root):
        groups.setdefault(r, []).append(i)
    return [groups[r] for r in sorted(groups)]


def cluster(candidates: Sequence[CandidateMention], params: PairScorerParams, threshold: float = 0.5,
            id_prefix: str = "", max_antecedents: int | None = 50) -> list[EntityCluster]:
    """Greedy best-first clustering; every candidate lands in exactly one cluster."""
    n = len(candidates)
    scores = np.full((n, n), -np.inf)
    if n > 1:
        idx = [(j, i) for i in range(n) for j in range(max(0, i - (max_antecedents or n)), i)]
        feats = np.stack([pair_features(candidates[j], candidates[i]) for j, i in idx])
        logits = params.logits(feats)
        for (j, i), z in zip(idx, logits):
            scores[j, i] = z
    links = greedy_antecedents(scores, logit_threshold(threshold), max_antecedents)
    return [
        EntityCluster(f"{id_prefix}E{k}", tuple((candidates[i].start, candidates[i].end) for i in members),
                      tuple(members))
        for k, members in enumerate(clusters_from_links(links))
    ]


def assign_entities(mentions: Sequence[Mention], clusters: Sequence[EntityCluster]) -> list[Mention]:
    """Rewrite entity ids of ``mentions`` from the clusters containing their spans."""
    owner = {span: c.entity_id for c in clusters for span in c.spans}
    return [replace(m, entity_id=owner.get((m.start, m.end), m.entity_id)) for m in mentions]


def resolve_document(doc: Document, mentions: Sequence[Mention], params: PairScorerParams,
                     threshold: float = 0.5, pronouns: frozenset[str] | None = None,
                     determiners: frozenset[str] | None = None) -> list[Mention]:
    mine = [m for m in mentions if m.doc_id == doc.doc_id]
    cands = detect_candidates(doc, mine, pronouns, determiners)
    clusters = cluster(cands, params, threshold, id_prefix=f"{doc.doc_id}_")
    return assign_entities(mine, clusters)


# --------------------------------------------------------------------------- io

KIND = "pair_scorer"


def save_pair_scorer(params: PairScorerParams, path: str | Path, cfg: PairScorerConfig | None = None) -> None:
    meta = {"features": list(FEATURE_NAMES), "config": None if cfg is None else cfg.__dict__}
    arrays = {"w1": params.w1, "b1": params.b1, "w2": params.w2, "b2": np.asarray(params.b2, dtype=np.float64)}
    save_container(path, KIND, meta, arrays)


def load_pair_scorer(path: str | Path) -> PairScorerParams:
    meta, arrays = load_container(path, KIND)
    if tuple(meta["features"]) != FEATURE_NAMES:
        raise ValueError(f"{path}: feature layout differs from this version")
    return PairScorerParams(arrays["w1"], arrays["b1"], arrays["w2"], float(arrays["b2"]))
